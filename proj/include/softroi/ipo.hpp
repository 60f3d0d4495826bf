#pragma once

#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "softroi/decoding.hpp"

namespace softroi {
namespace ipo {

inline constexpr const char* kImagePlaceholder = "<image>";

// True when the text is nonempty and carries the placeholder exactly once.
bool valid_prompt(const std::string& text);

struct PromptCandidate {
    std::string text;
    int iter_added = 0;  // 0 = seed
    std::optional<double> score;
};

struct PromptPool {
    std::size_t capacity = 5;
    std::vector<PromptCandidate> members;  // sorted by score after every update
};

struct GeneratorConfig {
    double temperature = 0.8;
    double top_p = 0.95;
    int max_new_tokens = 1024;
    int candidates_per_iter = 6;
    int iterations = 3;

    void validate() const;
};

struct TraceRecord {
    std::string prompt;
    int iter_added = 0;
    double score = 0.0;
    int iteration_evaluated = 0;
};

struct IPOTrace {
    std::vector<TraceRecord> records;         // append-only, one per scored candidate
    std::vector<int> skipped_iterations;      // generator transport failures
    std::vector<std::string> duplicates;      // exact-text repeats dropped before scoring
    std::vector<double> best_per_iteration;   // pool maximum after each completed iteration
    int iterations_run = 0;
};

class PromptGenerator {
public:
    virtual ~PromptGenerator() = default;
    // Must return exactly k nonempty prompt texts.
    virtual std::vector<std::string> generate(const PromptPool& pool, int k, const GeneratorConfig& cfg) = 0;
};

// Seeded template/synonym mutations of the pool members. Always yields k
// distinct texts with the placeholder intact.
class MockPromptGenerator final : public PromptGenerator {
public:
    explicit MockPromptGenerator(std::uint64_t seed) : rng_(seed) {}
    std::vector<std::string> generate(const PromptPool& pool, int k, const GeneratorConfig& cfg) override;

private:
    Rng rng_;
};

using PromptScorer = std::function<double(const std::string&)>;

struct IPOResult {
    PromptCandidate best;
    IPOTrace trace;
    PromptPool pool;
};

// The propose-evaluate-select loop. Never-scored candidates (seeds included)
// are scored once per text; each iteration keeps the top-N of pool plus new
// candidates. Transport failures skip the iteration and are recorded.
IPOResult ipo_loop(const std::vector<std::string>& seeds, PromptGenerator& generator,
                   const PromptScorer& scorer, const GeneratorConfig& cfg, std::size_t pool_capacity);

// Corpus BLEU-4 of decoded captions against the sample references, with the
// prompt text tokenized ahead of each sample's own prompt tokens.
double score_prompt(const std::string& prompt_text, const std::vector<EvalSample>& val_set,
                    const ConditionalLM& lm, const DecodeConfig& decode_cfg, const Detokenizer& detokenize,
                    const std::function<std::vector<int>(const std::string&)>& tokenize_prompt);

void write_trace(std::ostream& os, const IPOTrace& trace);
IPOTrace read_trace(std::istream& is);

std::vector<std::string> default_seed_prompts();

}  // namespace ipo
}  // namespace softroi

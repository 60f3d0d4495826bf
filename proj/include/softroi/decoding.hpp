#pragma once

#include <functional>
#include <set>
#include <string>
#include <vector>

#include "softroi/lm.hpp"
#include "softroi/metrics.hpp"

namespace softroi {

struct DecodeConfig {
    int num_beams = 6;
    int no_repeat_ngram_size = 3;  // 0 and 1 both disable the constraint
    double length_penalty = 0.1;
    int max_new_tokens = 16;
    int eos_token = 0;

    void validate() const;
};

struct BeamHypothesis {
    std::vector<int> tokens;  // prompt followed by generated tokens
    std::size_t prompt_len = 0;
    double cum_logprob = 0.0;
    bool finished = false;

    std::size_t gen_len() const { return tokens.size() - prompt_len; }
    std::vector<int> generated() const { return {tokens.begin() + static_cast<std::ptrdiff_t>(prompt_len), tokens.end()}; }
};

// Token ids whose emission would duplicate an n-gram already present in
// the hypothesis. n < 2 disables the constraint.
std::set<int> banned_tokens(const std::vector<int>& tokens, int n);

struct DecodeResult {
    std::vector<BeamHypothesis> ranked;  // by normalized score, best first
    std::vector<double> norm_scores;     // parallel to ranked
    bool fallback_used = false;          // a step banned the whole vocabulary
    std::string score_formula = "cum_logprob / len^length_penalty";

    const BeamHypothesis& best() const { return ranked.front(); }
};

// Argmax decoding; ties go to the lowest token id.
DecodeResult greedy_decode(const ConditionalLM& lm, const Matrix& context, const std::vector<int>& prompt,
                           const DecodeConfig& cfg);

// Beam search with the no-repeat mask applied before expansion and final
// ranking by cum_logprob / gen_len^length_penalty (ties: lexicographically
// smaller token sequence first).
DecodeResult beam_decode(const ConditionalLM& lm, const Matrix& context, const std::vector<int>& prompt,
                         const DecodeConfig& cfg);

struct EvalSample {
    std::string id;
    Matrix context;
    std::vector<int> prompt;
    metrics::RefSet references;
};

struct AblationRow {
    std::string name;
    DecodeConfig config;
    metrics::CorpusEval eval;
};

// The five pinned decoding configurations of the ablation grid.
std::vector<std::pair<std::string, DecodeConfig>> ablation_configs(int max_new_tokens = 16, int eos_token = 0);

using Detokenizer = std::function<std::string(const std::vector<int>&)>;

std::vector<AblationRow> run_ablation_grid(const ConditionalLM& lm, const std::vector<EvalSample>& samples,
                                           const Detokenizer& detokenize, int max_new_tokens = 16,
                                           int eos_token = 0);

}  // namespace softroi

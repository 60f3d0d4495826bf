#include "softroi/ipo.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <set>

#include <json.hpp>

namespace softroi {
namespace ipo {

bool valid_prompt(const std::string& text) {
    if (text.empty()) return false;
    std::size_t count = 0;
    for (std::size_t pos = text.find(kImagePlaceholder); pos != std::string::npos;
         pos = text.find(kImagePlaceholder, pos + 1))
        ++count;
    return count == 1;
}

void GeneratorConfig::validate() const {
    if (candidates_per_iter < 1) throw InvalidInput("candidates_per_iter must be >= 1");
    if (iterations < 1) throw InvalidInput("iterations must be >= 1");
    if (max_new_tokens < 1) throw InvalidInput("max_new_tokens must be >= 1");
}

std::vector<std::string> default_seed_prompts() {
    return {
        "Describe the image <image> in one short sentence.",
        "What does the picture <image> show?",
        "Give a brief caption for <image>.",
        "List the main objects visible in <image>.",
        "Summarize the scene in <image>.",
    };
}

namespace {

const std::vector<std::pair<std::string, std::string>>& synonym_table() {
    static const std::vector<std::pair<std::string, std::string>> table = {
        {"Describe", "Summarize"}, {"describe", "summarize"}, {"image", "picture"},
        {"picture", "photo"},      {"short", "brief"},        {"brief", "concise"},
        {"scene", "view"},         {"main", "key"},           {"objects", "items"},
        {"show", "depict"},        {"visible", "present"},    {"caption", "description"},
    };
    return table;
}

const std::vector<std::string>& suffix_table() {
    static const std::vector<std::string> table = {
        " Use plain words.",
        " Answer in one sentence.",
        " Mention colors if any.",
        " Focus on the foreground.",
    };
    return table;
}

// First-occurrence word swap that never touches the placeholder.
std::optional<std::string> apply_swap(const std::string& text, const std::string& from, const std::string& to) {
    const auto placeholder_at = text.find(kImagePlaceholder);
    std::size_t pos = 0;
    while ((pos = text.find(from, pos)) != std::string::npos) {
        const bool inside_placeholder = placeholder_at != std::string::npos && pos >= placeholder_at &&
                                        pos < placeholder_at + std::string(kImagePlaceholder).size();
        if (!inside_placeholder) {
            std::string out = text;
            out.replace(pos, from.size(), to);
            return out;
        }
        pos += 1;
    }
    return std::nullopt;
}

}  // namespace

std::vector<std::string> MockPromptGenerator::generate(const PromptPool& pool, int k,
                                                       const GeneratorConfig& cfg) {
    cfg.validate();
    if (k < 1) throw InvalidInput("k must be >= 1");
    std::set<std::string> taken;
    for (const auto& m : pool.members) taken.insert(m.text);

    std::vector<std::string> choices;
    auto offer = [&](const std::string& text) {
        if (valid_prompt(text) && !taken.count(text)) {
            taken.insert(text);
            choices.push_back(text);
        }
    };
    for (const auto& member : pool.members) {
        for (const auto& [from, to] : synonym_table()) {
            if (auto swapped = apply_swap(member.text, from, to)) offer(*swapped);
            if (auto swapped = apply_swap(member.text, to, from)) offer(*swapped);
        }
        for (const auto& suffix : suffix_table()) offer(member.text + suffix);
    }
    std::shuffle(choices.begin(), choices.end(), rng_);

    std::vector<std::string> out;
    for (const auto& c : choices) {
        if (static_cast<int>(out.size()) == k) break;
        out.push_back(c);
    }
    // numbered fallbacks keep the contract when the mutation space runs dry
    std::size_t variant = 1;
    while (static_cast<int>(out.size()) < k && !pool.members.empty()) {
        std::string text =
            pool.members[variant % pool.members.size()].text + " (variant " + std::to_string(variant) + ")";
        if (!taken.count(text)) {
            taken.insert(text);
            out.push_back(text);
        }
        ++variant;
    }
    if (static_cast<int>(out.size()) != k) throw InvalidInput("mock generator could not produce k prompts");
    return out;
}

namespace {

void sort_pool(std::vector<PromptCandidate>& members) {
    std::stable_sort(members.begin(), members.end(), [](const PromptCandidate& a, const PromptCandidate& b) {
        const double sa = a.score.value_or(-1e300);
        const double sb = b.score.value_or(-1e300);
        if (sa != sb) return sa > sb;
        if (a.iter_added != b.iter_added) return a.iter_added < b.iter_added;
        return a.text < b.text;
    });
}

}  // namespace

IPOResult ipo_loop(const std::vector<std::string>& seeds, PromptGenerator& generator,
                   const PromptScorer& scorer, const GeneratorConfig& cfg, std::size_t pool_capacity) {
    cfg.validate();
    if (seeds.empty()) throw InvalidInput("need at least one seed prompt");
    if (pool_capacity < 1) throw InvalidInput("pool capacity must be >= 1");

    IPOResult result;
    result.pool.capacity = pool_capacity;
    std::map<std::string, double> score_cache;

    for (const auto& seed : seeds) {
        if (!valid_prompt(seed))
            throw InvalidInput("seed prompt must contain the image placeholder exactly once: '" + seed + "'");
        bool duplicate = false;
        for (const auto& m : result.pool.members) duplicate |= m.text == seed;
        if (duplicate) {
            result.trace.duplicates.push_back(seed);
            continue;
        }
        result.pool.members.push_back({seed, 0, std::nullopt});
    }

    for (int iter = 1; iter <= cfg.iterations; ++iter) {
        std::vector<PromptCandidate> fresh;
        bool skipped = false;
        try {
            auto texts = generator.generate(result.pool, cfg.candidates_per_iter, cfg);
            if (static_cast<int>(texts.size()) != cfg.candidates_per_iter)
                throw InvalidInput("generator protocol violation: expected " +
                                   std::to_string(cfg.candidates_per_iter) + " prompts, got " +
                                   std::to_string(texts.size()));
            for (const auto& text : texts) {
                if (!valid_prompt(text))
                    throw InvalidInput("generator produced an invalid prompt: '" + text + "'");
                const bool known = score_cache.count(text) ||
                                   std::any_of(result.pool.members.begin(), result.pool.members.end(),
                                               [&](const PromptCandidate& m) { return m.text == text; }) ||
                                   std::any_of(fresh.begin(), fresh.end(),
                                               [&](const PromptCandidate& m) { return m.text == text; });
                if (known) {
                    result.trace.duplicates.push_back(text);
                    continue;
                }
                fresh.push_back({text, iter, std::nullopt});
            }
        } catch (const TransportError&) {
            // skipped iteration: no new candidates, but never-scored pool
            // members (the seeds) are still evaluated below
            result.trace.skipped_iterations.push_back(iter);
            skipped = true;
            fresh.clear();
        }

        auto score_all = [&](std::vector<PromptCandidate>& members) {
            for (auto& member : members) {
                if (member.score) continue;
                auto cached = score_cache.find(member.text);
                const double s = cached != score_cache.end() ? cached->second : scorer(member.text);
                score_cache[member.text] = s;
                member.score = s;
                result.trace.records.push_back({member.text, member.iter_added, s, iter});
            }
        };
        score_all(result.pool.members);
        score_all(fresh);

        for (auto& cand : fresh) result.pool.members.push_back(std::move(cand));
        sort_pool(result.pool.members);
        if (result.pool.members.size() > pool_capacity) result.pool.members.resize(pool_capacity);
        result.trace.best_per_iteration.push_back(result.pool.members.front().score.value());
        result.trace.iterations_run += 1;
    }

    if (result.pool.members.empty() || !result.pool.members.front().score)
        throw InvalidInput("optimization finished without a scored prompt (every iteration skipped?)");
    result.best = result.pool.members.front();
    return result;
}

double score_prompt(const std::string& prompt_text, const std::vector<EvalSample>& val_set,
                    const ConditionalLM& lm, const DecodeConfig& decode_cfg, const Detokenizer& detokenize,
                    const std::function<std::vector<int>(const std::string&)>& tokenize_prompt) {
    if (val_set.empty()) throw InvalidInput("empty validation set");
    const std::vector<int> prompt_tokens = tokenize_prompt(prompt_text);
    std::vector<std::string> candidates;
    std::vector<metrics::RefSet> references;
    for (const auto& sample : val_set) {
        std::vector<int> prompt = prompt_tokens;
        prompt.insert(prompt.end(), sample.prompt.begin(), sample.prompt.end());
        try {
            const DecodeResult result = decode_cfg.num_beams == 1
                                            ? greedy_decode(lm, sample.context, prompt, decode_cfg)
                                            : beam_decode(lm, sample.context, prompt, decode_cfg);
            candidates.push_back(detokenize(result.best().generated()));
        } catch (const std::exception& e) {
            throw InvalidInput("scoring failed on sample '" + sample.id + "': " + e.what());
        }
        references.push_back(sample.references);
    }
    return metrics::bleu_n(candidates, references, 4);
}

void write_trace(std::ostream& os, const IPOTrace& trace) {
    for (const auto& rec : trace.records) {
        nlohmann::ordered_json line{{"prompt", rec.prompt},
                                    {"iter_added", rec.iter_added},
                                    {"score", rec.score},
                                    {"iteration_evaluated", rec.iteration_evaluated}};
        os << line.dump() << '\n';
    }
}

IPOTrace read_trace(std::istream& is) {
    IPOTrace trace;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        auto j = nlohmann::json::parse(line);
        trace.records.push_back({j.at("prompt").get<std::string>(), j.at("iter_added").get<int>(),
                                 j.at("score").get<double>(), j.at("iteration_evaluated").get<int>()});
    }
    return trace;
}

}  // namespace ipo
}  // namespace softroi

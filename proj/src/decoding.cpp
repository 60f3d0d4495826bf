#include "softroi/decoding.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace softroi {

void DecodeConfig::validate() const {
    if (num_beams < 1) throw InvalidInput("num_beams must be >= 1");
    if (max_new_tokens < 1) throw InvalidInput("max_new_tokens must be >= 1");
    if (no_repeat_ngram_size < 0) throw InvalidInput("no_repeat_ngram_size must be >= 0");
    if (eos_token < 0) throw InvalidInput("eos_token must be a valid id");
}

std::set<int> banned_tokens(const std::vector<int>& tokens, int n) {
    std::set<int> banned;
    if (n < 2 || tokens.size() < static_cast<std::size_t>(n)) return banned;
    // the candidate n-gram is tokens[-(n-1):] + [t]; ban t when that gram
    // already occurs inside the hypothesis
    const auto prefix_len = static_cast<std::size_t>(n - 1);
    const auto suffix = tokens.end() - static_cast<std::ptrdiff_t>(prefix_len);
    for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= tokens.size(); ++i) {
        if (std::equal(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                       tokens.begin() + static_cast<std::ptrdiff_t>(i + prefix_len), suffix))
            banned.insert(tokens[i + prefix_len]);
    }
    return banned;
}

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double normalized_score(const BeamHypothesis& hyp, double length_penalty) {
    return hyp.cum_logprob / std::pow(static_cast<double>(hyp.gen_len()), length_penalty);
}

void check_logprobs(const Vector& lp) {
    // the LM contract: log-sum-exp of the full vocabulary is 0
    const double mx = lp.maxCoeff();
    const double lse = mx + std::log((lp.array() - mx).exp().sum());
    if (!(std::abs(lse) < 1e-6)) throw InvalidInput("LM returned an unnormalized distribution");
}

DecodeResult rank_hypotheses(std::vector<BeamHypothesis> finished, const DecodeConfig& cfg, bool fallback) {
    std::vector<std::size_t> order(finished.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::vector<double> scores(finished.size());
    for (std::size_t i = 0; i < finished.size(); ++i) scores[i] = normalized_score(finished[i], cfg.length_penalty);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return finished[a].tokens < finished[b].tokens;
    });
    DecodeResult result;
    result.fallback_used = fallback;
    for (std::size_t i : order) {
        result.norm_scores.push_back(scores[i]);
        result.ranked.push_back(std::move(finished[i]));
    }
    return result;
}

}  // namespace

DecodeResult greedy_decode(const ConditionalLM& lm, const Matrix& context, const std::vector<int>& prompt,
                           const DecodeConfig& cfg) {
    cfg.validate();
    BeamHypothesis hyp;
    hyp.tokens = prompt;
    hyp.prompt_len = prompt.size();
    bool fallback = false;

    for (int step = 0; step < cfg.max_new_tokens; ++step) {
        Vector lp = lm.next_logprobs(context, hyp.tokens);
        check_logprobs(lp);
        const auto banned = banned_tokens(hyp.tokens, cfg.no_repeat_ngram_size);
        int best = -1;
        for (int t = 0; t < lp.size(); ++t) {
            if (banned.count(t)) continue;
            if (best < 0 || lp(t) > lp(best)) best = t;  // ties keep the lower id
        }
        if (best < 0) {  // whole vocabulary banned: close with eos
            hyp.tokens.push_back(cfg.eos_token);
            hyp.cum_logprob += lp(cfg.eos_token);
            fallback = true;
            break;
        }
        hyp.tokens.push_back(best);
        hyp.cum_logprob += lp(best);
        if (best == cfg.eos_token) break;
    }
    hyp.finished = true;
    return rank_hypotheses({std::move(hyp)}, cfg, fallback);
}

DecodeResult beam_decode(const ConditionalLM& lm, const Matrix& context, const std::vector<int>& prompt,
                         const DecodeConfig& cfg) {
    cfg.validate();
    struct Candidate {
        std::vector<int> tokens;
        double cum_logprob;
    };

    BeamHypothesis start;
    start.tokens = prompt;
    start.prompt_len = prompt.size();
    std::vector<BeamHypothesis> active{start};
    std::vector<BeamHypothesis> finished;
    bool fallback = false;

    for (int step = 0; step < cfg.max_new_tokens && !active.empty(); ++step) {
        std::vector<Candidate> candidates;
        for (const auto& hyp : active) {
            Vector lp = lm.next_logprobs(context, hyp.tokens);
            check_logprobs(lp);
            const auto banned = banned_tokens(hyp.tokens, cfg.no_repeat_ngram_size);
            if (static_cast<int>(banned.size()) >= lp.size()) {
                BeamHypothesis closed = hyp;
                closed.tokens.push_back(cfg.eos_token);
                closed.cum_logprob += lp(cfg.eos_token);
                closed.finished = true;
                finished.push_back(std::move(closed));
                fallback = true;
                continue;
            }
            for (int t = 0; t < lp.size(); ++t) {
                if (banned.count(t)) continue;
                Candidate c;
                c.tokens = hyp.tokens;
                c.tokens.push_back(t);
                c.cum_logprob = hyp.cum_logprob + lp(t);
                candidates.push_back(std::move(c));
            }
        }

        std::stable_sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
            if (a.cum_logprob != b.cum_logprob) return a.cum_logprob > b.cum_logprob;
            return a.tokens < b.tokens;
        });

        // Each of the top num_beams candidates takes a slot; ending in eos
        // retires the slot into the finished pool. Width-1 search therefore
        // reduces exactly to greedy decoding.
        std::vector<BeamHypothesis> next_active;
        std::size_t slots = 0;
        for (auto& cand : candidates) {
            if (slots == static_cast<std::size_t>(cfg.num_beams)) break;
            ++slots;
            BeamHypothesis h;
            h.tokens = std::move(cand.tokens);
            h.prompt_len = prompt.size();
            h.cum_logprob = cand.cum_logprob;
            if (h.tokens.back() == cfg.eos_token) {
                h.finished = true;
                finished.push_back(std::move(h));
            } else {
                next_active.push_back(std::move(h));
            }
        }
        active = std::move(next_active);
    }

    // length cap: surviving beams finish as they stand
    for (auto& hyp : active) {
        hyp.finished = true;
        finished.push_back(std::move(hyp));
    }
    if (finished.empty()) throw InvalidInput("beam search produced no hypotheses");
    return rank_hypotheses(std::move(finished), cfg, fallback);
}

std::vector<std::pair<std::string, DecodeConfig>> ablation_configs(int max_new_tokens, int eos_token) {
    auto make = [&](int beams, int ngram, double penalty) {
        DecodeConfig c;
        c.num_beams = beams;
        c.no_repeat_ngram_size = ngram;
        c.length_penalty = penalty;
        c.max_new_tokens = max_new_tokens;
        c.eos_token = eos_token;
        return c;
    };
    return {{"Greedy", make(1, 0, 1.0)},
            {"Beam Only", make(6, 0, 1.0)},
            {"Beam + no_repeat", make(6, 3, 1.0)},
            {"Beam + length_penalty", make(6, 0, 0.1)},
            {"Full constraints", make(6, 3, 0.1)}};
}

std::vector<AblationRow> run_ablation_grid(const ConditionalLM& lm, const std::vector<EvalSample>& samples,
                                           const Detokenizer& detokenize, int max_new_tokens, int eos_token) {
    if (samples.empty()) throw InvalidInput("ablation grid needs at least one sample");
    std::vector<AblationRow> rows;
    for (const auto& [name, cfg] : ablation_configs(max_new_tokens, eos_token)) {
        std::vector<std::string> cands;
        std::vector<metrics::RefSet> refs;
        for (const auto& sample : samples) {
            const DecodeResult result = cfg.num_beams == 1 ? greedy_decode(lm, sample.context, sample.prompt, cfg)
                                                           : beam_decode(lm, sample.context, sample.prompt, cfg);
            cands.push_back(detokenize(result.best().generated()));
            refs.push_back(sample.references);
        }
        AblationRow row;
        row.name = name;
        row.config = cfg;
        row.eval = metrics::evaluate_corpus(cands, refs);
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace softroi

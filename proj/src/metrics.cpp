#include "softroi/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <set>

namespace softroi {
namespace metrics {

std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> out;
    std::string word;
    auto flush = [&]() {
        if (!word.empty()) {
            out.push_back(word);
            word.clear();
        }
    };
    for (unsigned char c : text) {
        if (std::isspace(c)) {
            flush();
        } else if (std::ispunct(c)) {
            continue;
        } else {
            word.push_back(static_cast<char>(std::tolower(c)));
        }
    }
    flush();
    return out;
}

namespace {

using Tokens = std::vector<std::string>;
using NgramCounts = std::map<std::vector<std::string>, double>;

NgramCounts count_ngrams(const Tokens& tokens, int n) {
    NgramCounts counts;
    if (static_cast<int>(tokens.size()) < n) return counts;
    for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= tokens.size(); ++i)
        counts[std::vector<std::string>(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                                        tokens.begin() + static_cast<std::ptrdiff_t>(i + static_cast<std::size_t>(n)))] += 1.0;
    return counts;
}

void check_corpus(const std::vector<std::string>& candidates, const std::vector<RefSet>& references) {
    if (candidates.empty()) throw InvalidInput("empty evaluation corpus");
    if (candidates.size() != references.size())
        throw InvalidInput("candidate and reference lists differ in length");
    for (const auto& refs : references)
        if (refs.empty()) throw InvalidInput("a sample has no references");
}

std::size_t lcs_length(const Tokens& a, const Tokens& b) {
    std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
    for (std::size_t i = 1; i <= a.size(); ++i) {
        for (std::size_t j = 1; j <= b.size(); ++j)
            cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

}  // namespace

double bleu_n(const std::vector<std::string>& candidates, const std::vector<RefSet>& references, int n) {
    check_corpus(candidates, references);
    if (n < 1 || n > 4) throw InvalidInput("bleu order must lie in 1..4");

    std::vector<double> matched(static_cast<std::size_t>(n), 0.0);
    std::vector<double> total(static_cast<std::size_t>(n), 0.0);
    double cand_len = 0.0, ref_len = 0.0;

    for (std::size_t i = 0; i < candidates.size(); ++i) {
        const Tokens cand = tokenize(candidates[i]);
        std::vector<Tokens> refs;
        for (const auto& r : references[i]) refs.push_back(tokenize(r));

        cand_len += static_cast<double>(cand.size());
        // closest reference length, ties toward the shorter
        std::size_t best_ref = refs[0].size();
        for (const auto& r : refs) {
            const auto d = [&](std::size_t len) {
                return len > cand.size() ? len - cand.size() : cand.size() - len;
            };
            if (d(r.size()) < d(best_ref) || (d(r.size()) == d(best_ref) && r.size() < best_ref))
                best_ref = r.size();
        }
        ref_len += static_cast<double>(best_ref);

        for (int k = 1; k <= n; ++k) {
            const auto counts = count_ngrams(cand, k);
            NgramCounts max_ref;
            for (const auto& r : refs)
                for (const auto& [gram, c] : count_ngrams(r, k)) max_ref[gram] = std::max(max_ref[gram], c);
            for (const auto& [gram, c] : counts) {
                auto it = max_ref.find(gram);
                matched[static_cast<std::size_t>(k - 1)] += std::min(c, it == max_ref.end() ? 0.0 : it->second);
                total[static_cast<std::size_t>(k - 1)] += c;
            }
        }
    }

    if (cand_len == 0.0) return 0.0;
    // Orders with no candidate n-grams at all are skipped rather than
    // zeroing the score, so short identity corpora still evaluate to 1.
    double log_prec = 0.0;
    int populated = 0;
    for (int k = 0; k < n; ++k) {
        if (total[static_cast<std::size_t>(k)] == 0.0) continue;
        if (matched[static_cast<std::size_t>(k)] == 0.0) return 0.0;
        log_prec += std::log(matched[static_cast<std::size_t>(k)] / total[static_cast<std::size_t>(k)]);
        ++populated;
    }
    if (populated == 0) return 0.0;
    const double bp = cand_len > ref_len ? 1.0 : std::exp(1.0 - ref_len / cand_len);
    return bp * std::exp(log_prec / populated);
}

double rouge_l(const std::vector<std::string>& candidates, const std::vector<RefSet>& references, double beta) {
    check_corpus(candidates, references);
    double acc = 0.0;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        const Tokens cand = tokenize(candidates[i]);
        double best = 0.0;
        for (const auto& r : references[i]) {
            const Tokens ref = tokenize(r);
            if (cand.empty() || ref.empty()) continue;
            const auto lcs = static_cast<double>(lcs_length(cand, ref));
            if (lcs == 0.0) continue;
            const double p = lcs / static_cast<double>(cand.size());
            const double q = lcs / static_cast<double>(ref.size());
            best = std::max(best, (1.0 + beta * beta) * p * q / (q + beta * beta * p));
        }
        acc += best;
    }
    return acc / static_cast<double>(candidates.size());
}

double cider(const std::vector<std::string>& candidates, const std::vector<RefSet>& references) {
    check_corpus(candidates, references);
    constexpr int kOrders = 4;
    constexpr double kSigma = 6.0;
    const double corpus_n = static_cast<double>(candidates.size());

    // Document frequency of each n-gram over the reference sets.
    std::map<std::vector<std::string>, double> df;
    for (const auto& refs : references) {
        std::set<std::vector<std::string>> seen;
        for (const auto& r : refs) {
            const Tokens toks = tokenize(r);
            for (int n = 1; n <= kOrders; ++n)
                for (const auto& [gram, c] : count_ngrams(toks, n)) seen.insert(gram);
        }
        for (const auto& gram : seen) df[gram] += 1.0;
    }
    const auto idf = [&](const std::vector<std::string>& gram) {
        auto it = df.find(gram);
        return std::log(corpus_n / std::max(1.0, it == df.end() ? 0.0 : it->second));
    };
    const auto tfidf_vec = [&](const Tokens& toks, int n) {
        NgramCounts v = count_ngrams(toks, n);
        for (auto& [gram, c] : v) c *= idf(gram);
        return v;
    };

    double corpus_acc = 0.0;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        const Tokens cand = tokenize(candidates[i]);
        double ref_acc = 0.0;
        for (const auto& r : references[i]) {
            const Tokens ref = tokenize(r);
            double order_acc = 0.0;
            for (int n = 1; n <= kOrders; ++n) {
                const NgramCounts vc = tfidf_vec(cand, n);
                const NgramCounts vr = tfidf_vec(ref, n);
                double dot = 0.0, nc = 0.0, nr = 0.0;
                for (const auto& [gram, w] : vc) {
                    nc += w * w;
                    auto it = vr.find(gram);
                    if (it != vr.end()) dot += w * it->second;
                }
                for (const auto& [gram, w] : vr) nr += w * w;
                if (nc > 0.0 && nr > 0.0) order_acc += dot / (std::sqrt(nc) * std::sqrt(nr));
            }
            const double delta = static_cast<double>(cand.size()) - static_cast<double>(ref.size());
            ref_acc += std::exp(-delta * delta / (2.0 * kSigma * kSigma)) * order_acc / kOrders;
        }
        corpus_acc += 10.0 * ref_acc / static_cast<double>(references[i].size());
    }
    return corpus_acc / corpus_n;
}

CorpusEval evaluate_corpus(const std::vector<std::string>& candidates, const std::vector<RefSet>& references) {
    CorpusEval out;
    for (int n = 1; n <= 4; ++n) out.bleu[n - 1] = bleu_n(candidates, references, n);
    out.rouge_l = rouge_l(candidates, references);
    out.cider = cider(candidates, references);
    out.n_samples = candidates.size();
    return out;
}

double UnavailableEmbeddingSimilarity::score(const std::string&, const Vector&,
                                             const std::vector<Vector>&) const {
    throw InvalidInput("not implemented: requires pretrained encoder");
}

}  // namespace metrics
}  // namespace softroi

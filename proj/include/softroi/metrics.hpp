#pragma once

#include <string>
#include <vector>

#include "softroi/common.hpp"

namespace softroi {
namespace metrics {

// Lowercase, strip ASCII punctuation, split on whitespace. Pinned as
// tokenizer "v1"; every reported metric depends on it.
std::vector<std::string> tokenize(const std::string& text);

using RefSet = std::vector<std::string>;

// Corpus BLEU with uniform weights over orders 1..n, clipped counts against
// the multi-reference maximum and the closest-reference brevity penalty.
// Any zero matched order yields a hard 0 (no smoothing).
double bleu_n(const std::vector<std::string>& candidates, const std::vector<RefSet>& references, int n);

// Mean over the corpus of the best per-reference LCS F-measure.
double rouge_l(const std::vector<std::string>& candidates, const std::vector<RefSet>& references,
               double beta = 1.2);

// TF-IDF n-gram cosine over orders 1..4 with the Gaussian length penalty
// (sigma 6) and the x10 scale. Document frequencies come from the corpus
// reference sets.
double cider(const std::vector<std::string>& candidates, const std::vector<RefSet>& references);

struct CorpusEval {
    double bleu[4] = {0, 0, 0, 0};
    double rouge_l = 0.0;
    double cider = 0.0;
    std::size_t n_samples = 0;
};

CorpusEval evaluate_corpus(const std::vector<std::string>& candidates, const std::vector<RefSet>& references);

// Embedding-based similarity hook (CLIP-S family). No implementation ships;
// callers get a clear error until a pretrained encoder is plugged in.
class EmbeddingSimilarity {
public:
    virtual ~EmbeddingSimilarity() = default;
    virtual double score(const std::string& candidate, const Vector& image_embedding,
                         const std::vector<Vector>& reference_embeddings) const = 0;
};

class UnavailableEmbeddingSimilarity final : public EmbeddingSimilarity {
public:
    double score(const std::string&, const Vector&, const std::vector<Vector>&) const override;
};

}  // namespace metrics
}  // namespace softroi

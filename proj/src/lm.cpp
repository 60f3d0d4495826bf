#include "softroi/lm.hpp"

#include <cmath>

#include "softroi/metrics.hpp"

namespace softroi {

Projector random_projector(int token_dim, int ctx_dim, std::uint64_t seed) {
    Rng rng(seed);
    Projector p;
    p.weight = gaussian_matrix(rng, token_dim, ctx_dim, 1.0 / std::sqrt(token_dim));
    p.bias = Vector::Zero(ctx_dim);
    return p;
}

Matrix project_tokens(const Matrix& tokens, const Projector& projector) {
    if (tokens.cols() != projector.weight.rows())
        throw InvalidInput("projector expects " + std::to_string(projector.weight.rows()) +
                           "-dim tokens, got " + std::to_string(tokens.cols()));
    return (tokens * projector.weight).rowwise() + projector.bias.transpose();
}

ToyConditionalLM::ToyConditionalLM(std::vector<std::string> vocab, int context_dim, double temperature,
                                   std::uint64_t seed)
    : vocab_(std::move(vocab)), context_dim_(context_dim), temperature_(temperature) {
    if (vocab_.size() < 2) throw InvalidInput("toy LM needs eos plus at least one word");
    if (context_dim_ < 1) throw InvalidInput("context dim must be >= 1");
    if (!(temperature_ > 0.0)) throw InvalidInput("temperature must be positive");
    Rng rng(seed);
    const auto v = static_cast<Eigen::Index>(vocab_.size());
    ctx_weights_ = gaussian_matrix(rng, v, context_dim_, 1.0);
    const std::size_t side = vocab_.size() + 1;  // BOS sentinel
    history_.resize(side * side * vocab_.size());
    std::normal_distribution<double> dist(0.0, 1.0);
    for (auto& h : history_) h = dist(rng);
}

ToyConditionalLM ToyConditionalLM::default_lm(std::uint64_t seed) {
    return ToyConditionalLM({"</s>", "a",   "the",  "man",  "woman",   "dog",      "cat",     "ball",
                             "park", "red", "blue", "near", "sitting", "standing", "holding", "street"},
                            8, 0.7, seed);
}

Vector ToyConditionalLM::next_logprobs(const Matrix& context, std::span<const int> prefix) const {
    if (context.cols() != context_dim_) throw InvalidInput("context dim does not match the LM");
    const auto v = static_cast<Eigen::Index>(vocab_.size());
    const int bos = static_cast<int>(vocab_.size());
    const int prev1 = prefix.empty() ? bos : prefix[prefix.size() - 1];
    const int prev2 = prefix.size() < 2 ? bos : prefix[prefix.size() - 2];
    if (prev1 < 0 || prev1 > bos || prev2 < 0 || prev2 > bos) throw InvalidInput("token id out of range");

    Vector summary = context.colwise().mean();
    Vector logits = ctx_weights_ * summary;
    const std::size_t side = vocab_.size() + 1;
    for (Eigen::Index t = 0; t < v; ++t)
        logits(t) += history_[(static_cast<std::size_t>(prev2) * side + static_cast<std::size_t>(prev1)) *
                                  vocab_.size() +
                              static_cast<std::size_t>(t)];
    logits /= temperature_;

    const double mx = logits.maxCoeff();
    const double lse = mx + std::log((logits.array() - mx).exp().sum());
    return logits.array() - lse;
}

std::vector<int> ToyConditionalLM::tokenize(const std::string& text) const {
    std::vector<int> out;
    for (const auto& word : metrics::tokenize(text)) {
        int id = -1;
        for (std::size_t i = 1; i < vocab_.size(); ++i)
            if (vocab_[i] == word) {
                id = static_cast<int>(i);
                break;
            }
        if (id < 0) id = static_cast<int>(fnv1a64(word) % (vocab_.size() - 1)) + 1;
        out.push_back(id);
    }
    return out;
}

std::string ToyConditionalLM::detokenize(std::span<const int> tokens) const {
    std::string out;
    for (int t : tokens) {
        if (t == eos_token()) break;
        if (t < 0 || t >= vocab_size()) throw InvalidInput("token id out of range");
        if (!out.empty()) out += ' ';
        out += vocab_[static_cast<std::size_t>(t)];
    }
    return out;
}

}  // namespace softroi

#pragma once

#include <span>
#include <string>
#include <vector>

#include "softroi/common.hpp"

namespace softroi {

// Behavior contract for the caption generator: a full-vocabulary
// log-probability vector for the next token, conditioned on continuous
// context embeddings and the token prefix. Implementations must be safe
// for concurrent read-only queries.
class ConditionalLM {
public:
    virtual ~ConditionalLM() = default;
    virtual Vector next_logprobs(const Matrix& context, std::span<const int> prefix) const = 0;
    virtual int vocab_size() const = 0;
};

// Affine per-token map from visual tokens into the LM context space.
struct Projector {
    Matrix weight;  // D_out x ctx_dim
    Vector bias;    // ctx_dim
};

Projector random_projector(int token_dim, int ctx_dim, std::uint64_t seed);

Matrix project_tokens(const Matrix& tokens, const Projector& projector);

// Deterministic stand-in for the frozen caption model. Scores combine a
// linear read of the mean-pooled context with a seeded lookup over the
// previous two tokens, sharpened by a temperature.
class ToyConditionalLM final : public ConditionalLM {
public:
    ToyConditionalLM(std::vector<std::string> vocab, int context_dim, double temperature, std::uint64_t seed);

    static ToyConditionalLM default_lm(std::uint64_t seed = 7);

    Vector next_logprobs(const Matrix& context, std::span<const int> prefix) const override;
    int vocab_size() const override { return static_cast<int>(vocab_.size()); }
    int context_dim() const { return context_dim_; }
    int eos_token() const { return 0; }

    // Word-level mapping; unknown words hash into the non-eos range.
    std::vector<int> tokenize(const std::string& text) const;
    std::string detokenize(std::span<const int> tokens) const;
    const std::vector<std::string>& vocab() const { return vocab_; }

private:
    double score(std::span<const int> prefix, int prev2, int prev1, int next) const;

    std::vector<std::string> vocab_;
    int context_dim_;
    double temperature_;
    Matrix ctx_weights_;            // V x context_dim
    std::vector<double> history_;   // (V+1) x (V+1) x V lookup, BOS sentinel = V
};

}  // namespace softroi

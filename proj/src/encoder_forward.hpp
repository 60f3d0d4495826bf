#pragma once

// Internal forward-pass cache shared between encode() and the analytic
// backward. Not installed.

#include <vector>

#include "softroi/encoder.hpp"

namespace softroi::detail {

struct AttnBlock {
    Matrix query_in;  // L x d_v for blocks >= 2 (previous block output); unused for block 1
    Matrix scores;    // L x N, pre-softmax
    Matrix probs;     // L x N, softmax rows, pre-dropout
    Matrix probs_eff; // after dropout mask (aliases probs when dropout off)
    Matrix out;       // L x d_v
    Matrix attn_mask; // empty when dropout off, else 0 / 1/(1-p) multipliers
};

struct ForwardCache {
    Matrix theta;   // N x n_rff
    Matrix phi;     // N x 2*n_rff
    Matrix h1;      // N x d_c, tanh hidden, pre-dropout
    Matrix h1_eff;  // post-dropout
    Matrix h1_mask;
    Matrix C;       // N x d_c

    std::vector<Matrix> E;  // per atlas N x d_roi

    // Gate
    std::vector<Vector> gate_mean;    // d_roi per atlas
    std::vector<Vector> gate_h;      // hidden per atlas, pre-dropout
    std::vector<Vector> gate_h_eff;
    std::vector<Vector> gate_mask;
    Vector gate_scores;  // A
    Vector gate_alpha;   // A

    // Voxel-gate
    std::vector<Matrix> vg_rho;    // per atlas N x d_red
    std::vector<Matrix> vg_h;      // tanh hidden, pre-dropout
    std::vector<Matrix> vg_h_eff;
    std::vector<Matrix> vg_mask;
    Matrix vg_scores;  // N x A
    Matrix vg_alpha;   // N x A

    Matrix fused;  // N x d_roi (gate / voxel-gate only)
    Matrix X;      // N x key_input_dim
    Matrix K;      // N x d_k
    Matrix V;      // N x d_v

    std::vector<AttnBlock> blocks;
    Matrix Z;  // L x D_out
};

// Runs the full forward pass, filling the cache. Throws on invalid batches.
void run_forward(const SubjectBatch& batch, const EncoderParams& params, const EncoderConfig& config,
                 bool dropout_enabled, Rng* rng, ForwardCache& cache);

Matrix softmax_rows(const Matrix& scores);

}  // namespace softroi::detail

#pragma once

#include <string>
#include <vector>

#include "softroi/atlas.hpp"
#include "softroi/common.hpp"
#include "softroi/grid.hpp"

namespace softroi {

enum class FusionMode { Concat, Gate, VoxelGate };

std::string to_string(FusionMode mode);
FusionMode fusion_from_string(const std::string& name);

struct EncoderConfig {
    int d_c = 32;      // coordinate encoding dim
    int d_k = 32;      // key dim, must equal d_c
    int d_roi = 16;    // ROI embedding dim
    int d_v = 32;      // value dim
    int d_red = 0;     // gating reduction dim; 0 selects max(4, d_roi/4)
    int L = 8;         // output token count
    int D_out = 64;    // output token dim
    int n_rff = 16;    // random Fourier frequency count
    int n_blocks = 1;  // cross-attention blocks in the resampler
    FusionMode fusion = FusionMode::VoxelGate;
    double attn_dropout = 0.5;
    double ffn_dropout = 0.15;

    int reduced_dim() const { return d_red > 0 ? d_red : std::max(4, d_roi / 4); }
    void validate() const;
};

// Every learnable tensor of the encoder. Gradient accumulators reuse the
// same struct. Biases and scalar outputs are stored as vectors so the
// optimizer, checkpoints and finite differences can walk one flat list.
struct EncoderParams {
    Matrix rff_freqs;  // n_rff x 3, frozen after init
    Matrix coord_w1;   // 2*n_rff x d_c
    Vector coord_b1;   // d_c
    Matrix coord_w2;   // d_c x d_c
    Vector coord_b2;   // d_c

    std::vector<Matrix> roi_tables;  // per atlas, K_a x d_roi

    Matrix gate_w1;  // d_roi x d_roi   (Gate mode, shared across atlases)
    Vector gate_b1;  // d_roi
    Vector gate_w2;  // d_roi
    Vector gate_b2;  // 1

    Matrix vg_reduce;  // d_roi x d_red  (Voxel-gate mode)
    Matrix vg_w1;      // d_red x d_red
    Vector vg_b1;      // d_red
    Vector vg_w2;      // d_red
    Vector vg_b2;      // 1

    Matrix key_proj;  // key_input_dim x d_k
    Vector value_w;   // d_v
    Vector value_b;   // d_v
    Matrix queries;   // L x d_k

    std::vector<Matrix> block_queries;  // extra blocks: d_v x d_k each

    Matrix out_w;  // d_v x D_out
    Vector out_b;  // D_out

    struct TensorRef {
        std::string name;
        double* data;
        Eigen::Index rows;
        Eigen::Index cols;
        bool trainable;
    };
    std::vector<TensorRef> tensors();
    std::vector<TensorRef> tensors() const;  // refs are non-owning; const cast is the caller's contract
};

// Width of the concatenated per-voxel feature entering key_proj.
int key_input_dim(const EncoderConfig& config, std::size_t n_atlases);

EncoderParams init_encoder_params(const EncoderConfig& config, const std::vector<std::size_t>& atlas_cols,
                                  std::uint64_t seed);

EncoderParams zeros_like(const EncoderParams& p);

struct SubjectBatch {
    Matrix coords;   // N x 3, in [-1, 1]
    Vector signals;  // N
    std::vector<MembershipMatrix> memberships;  // one per atlas, all with N rows
};

// Affine map per axis: index 0 -> -1, index dim-1 -> +1, dim 1 -> 0.
Matrix normalize_coords(const VoxelIndexList& voxels, const VoxelGrid& grid);

// sin/cos random Fourier features followed by the two-layer coordinate MLP.
Matrix encode_coords(const Matrix& coords, const EncoderParams& params);

// Row-gather of the embedding table through a one-hot membership matrix.
Matrix embed_roi(const MembershipMatrix& membership, const Matrix& table);

Matrix fuse_concat(const Matrix& C, const std::vector<Matrix>& E, const Matrix& key_proj);
std::pair<Matrix, Vector> fuse_gate(const Matrix& C, const std::vector<Matrix>& E, const EncoderParams& params);
std::pair<Matrix, Matrix> fuse_voxel_gate(const Matrix& C, const std::vector<Matrix>& E,
                                          const EncoderParams& params);

Matrix project_values(const Vector& signals, const EncoderParams& params);

// Full forward pass: fixed-length L x D_out visual tokens for any N >= 1.
// Dropout draws masks from `rng` and is only legal when one is supplied.
Matrix encode(const SubjectBatch& batch, const EncoderParams& params, const EncoderConfig& config,
              bool dropout_enabled = false, Rng* rng = nullptr);

double alignment_loss(const Matrix& z_fmri, const Matrix& z_clip);

// Analytic gradients of alignment_loss(encode(batch), z_clip) with respect
// to every parameter tensor. Returns the gradient struct; the loss value is
// written to *loss_out when given.
EncoderParams encoder_backward(const SubjectBatch& batch, const EncoderParams& params,
                               const EncoderConfig& config, const Matrix& z_clip, double* loss_out = nullptr,
                               bool dropout_enabled = false, Rng* rng = nullptr);

}  // namespace softroi

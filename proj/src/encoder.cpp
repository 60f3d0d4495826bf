#include "softroi/encoder.hpp"

#include <cmath>
#include <numbers>

#include "encoder_forward.hpp"

namespace softroi {

std::string to_string(FusionMode mode) {
    switch (mode) {
        case FusionMode::Concat: return "concat";
        case FusionMode::Gate: return "gate";
        case FusionMode::VoxelGate: return "voxel_gate";
    }
    return "?";
}

FusionMode fusion_from_string(const std::string& name) {
    if (name == "concat") return FusionMode::Concat;
    if (name == "gate") return FusionMode::Gate;
    if (name == "voxel_gate") return FusionMode::VoxelGate;
    throw InvalidInput("unknown fusion mode '" + name + "'");
}

void EncoderConfig::validate() const {
    if (d_c < 1 || d_k < 1 || d_roi < 1 || d_v < 1 || L < 1 || D_out < 1 || n_rff < 1 || n_blocks < 1)
        throw InvalidInput("encoder dims must all be >= 1");
    if (d_c != d_k) throw InvalidInput("coordinate encoding dim must equal the key dim");
    if (!(attn_dropout >= 0.0 && attn_dropout < 1.0) || !(ffn_dropout >= 0.0 && ffn_dropout < 1.0))
        throw InvalidInput("dropout rates must lie in [0, 1)");
}

int key_input_dim(const EncoderConfig& config, std::size_t n_atlases) {
    if (config.fusion == FusionMode::Concat)
        return config.d_c + static_cast<int>(n_atlases) * config.d_roi;
    return config.d_c + config.d_roi;
}

EncoderParams init_encoder_params(const EncoderConfig& config, const std::vector<std::size_t>& atlas_cols,
                                  std::uint64_t seed) {
    config.validate();
    if (atlas_cols.empty()) throw InvalidInput("need at least one atlas");
    Rng rng(seed);
    const int d_red = config.reduced_dim();
    EncoderParams p;
    p.rff_freqs = gaussian_matrix(rng, config.n_rff, 3, 1.0);
    p.coord_w1 = kaiming_uniform(rng, 2 * config.n_rff, config.d_c, 2 * config.n_rff);
    p.coord_b1 = Vector::Zero(config.d_c);
    p.coord_w2 = kaiming_uniform(rng, config.d_c, config.d_c, config.d_c);
    p.coord_b2 = Vector::Zero(config.d_c);
    for (std::size_t k : atlas_cols)
        p.roi_tables.push_back(kaiming_uniform(rng, static_cast<Eigen::Index>(k), config.d_roi, config.d_roi));
    p.gate_w1 = kaiming_uniform(rng, config.d_roi, config.d_roi, config.d_roi);
    p.gate_b1 = Vector::Zero(config.d_roi);
    p.gate_w2 = kaiming_uniform(rng, config.d_roi, 1, config.d_roi).col(0);
    p.gate_b2 = Vector::Zero(1);
    p.vg_reduce = kaiming_uniform(rng, config.d_roi, d_red, config.d_roi);
    p.vg_w1 = kaiming_uniform(rng, d_red, d_red, d_red);
    p.vg_b1 = Vector::Zero(d_red);
    p.vg_w2 = kaiming_uniform(rng, d_red, 1, d_red).col(0);
    p.vg_b2 = Vector::Zero(1);
    p.key_proj = kaiming_uniform(rng, key_input_dim(config, atlas_cols.size()), config.d_k,
                                 key_input_dim(config, atlas_cols.size()));
    p.value_w = kaiming_uniform(rng, config.d_v, 1, 1).col(0);
    p.value_b = Vector::Zero(config.d_v);
    p.queries = kaiming_uniform(rng, config.L, config.d_k, config.d_k);
    for (int b = 1; b < config.n_blocks; ++b)
        p.block_queries.push_back(kaiming_uniform(rng, config.d_v, config.d_k, config.d_v));
    p.out_w = kaiming_uniform(rng, config.d_v, config.D_out, config.d_v);
    p.out_b = Vector::Zero(config.D_out);
    return p;
}

namespace {

template <typename Params, typename Ref>
std::vector<Ref> enumerate(Params& p) {
    std::vector<Ref> out;
    auto add_m = [&](const std::string& name, auto& m, bool trainable) {
        out.push_back({name, const_cast<double*>(m.data()), m.rows(), m.cols(), trainable});
    };
    add_m("rff_freqs", p.rff_freqs, false);
    add_m("coord_w1", p.coord_w1, true);
    add_m("coord_b1", p.coord_b1, true);
    add_m("coord_w2", p.coord_w2, true);
    add_m("coord_b2", p.coord_b2, true);
    for (std::size_t a = 0; a < p.roi_tables.size(); ++a)
        add_m("roi_table_" + std::to_string(a), p.roi_tables[a], true);
    add_m("gate_w1", p.gate_w1, true);
    add_m("gate_b1", p.gate_b1, true);
    add_m("gate_w2", p.gate_w2, true);
    add_m("gate_b2", p.gate_b2, true);
    add_m("vg_reduce", p.vg_reduce, true);
    add_m("vg_w1", p.vg_w1, true);
    add_m("vg_b1", p.vg_b1, true);
    add_m("vg_w2", p.vg_w2, true);
    add_m("vg_b2", p.vg_b2, true);
    add_m("key_proj", p.key_proj, true);
    add_m("value_w", p.value_w, true);
    add_m("value_b", p.value_b, true);
    add_m("queries", p.queries, true);
    for (std::size_t b = 0; b < p.block_queries.size(); ++b)
        add_m("block_queries_" + std::to_string(b), p.block_queries[b], true);
    add_m("out_w", p.out_w, true);
    add_m("out_b", p.out_b, true);
    return out;
}

}  // namespace

std::vector<EncoderParams::TensorRef> EncoderParams::tensors() {
    return enumerate<EncoderParams, TensorRef>(*this);
}

std::vector<EncoderParams::TensorRef> EncoderParams::tensors() const {
    return enumerate<const EncoderParams, TensorRef>(*this);
}

EncoderParams zeros_like(const EncoderParams& p) {
    EncoderParams z = p;
    for (auto& t : z.tensors()) Eigen::Map<Matrix>(t.data, t.rows, t.cols).setZero();
    return z;
}

Matrix normalize_coords(const VoxelIndexList& voxels, const VoxelGrid& grid) {
    if (voxels.count() == 0) throw InvalidInput("empty voxel list");
    grid.validate();
    Matrix out(static_cast<Eigen::Index>(voxels.count()), 3);
    for (std::size_t n = 0; n < voxels.count(); ++n)
        for (int axis = 0; axis < 3; ++axis) {
            const int dim = grid.dims[axis];
            out(static_cast<Eigen::Index>(n), axis) =
                dim == 1 ? 0.0 : 2.0 * voxels.coords[n][axis] / (dim - 1) - 1.0;
        }
    return out;
}

namespace detail {

Matrix softmax_rows(const Matrix& scores) {
    Matrix p(scores.rows(), scores.cols());
    for (Eigen::Index i = 0; i < scores.rows(); ++i) {
        const double m = scores.row(i).maxCoeff();
        p.row(i) = (scores.row(i).array() - m).exp();
        p.row(i) /= p.row(i).sum();
    }
    return p;
}

namespace {

Matrix dropout_mask(Rng& rng, Eigen::Index rows, Eigen::Index cols, double rate) {
    std::bernoulli_distribution keep(1.0 - rate);
    Matrix m(rows, cols);
    const double scale = 1.0 / (1.0 - rate);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = keep(rng) ? scale : 0.0;
    return m;
}

void coord_features(const Matrix& coords, const EncoderParams& params, ForwardCache& c) {
    c.theta = 2.0 * std::numbers::pi * coords * params.rff_freqs.transpose();
    c.phi.resize(c.theta.rows(), 2 * c.theta.cols());
    c.phi << c.theta.array().sin().matrix(), c.theta.array().cos().matrix();
    c.h1 = ((c.phi * params.coord_w1).rowwise() + params.coord_b1.transpose()).array().tanh();
}

void attention_block(const Matrix& Q, const Matrix& K, const Matrix& V, double inv_sqrt_dk,
                     bool dropout_enabled, double rate, Rng* rng, AttnBlock& blk) {
    blk.scores = Q * K.transpose() * inv_sqrt_dk;
    blk.probs = softmax_rows(blk.scores);
    if (dropout_enabled && rate > 0.0) {
        blk.attn_mask = dropout_mask(*rng, blk.probs.rows(), blk.probs.cols(), rate);
        blk.probs_eff = blk.probs.cwiseProduct(blk.attn_mask);
    } else {
        blk.probs_eff = blk.probs;
    }
    blk.out = blk.probs_eff * V;
}

}  // namespace

void run_forward(const SubjectBatch& batch, const EncoderParams& params, const EncoderConfig& config,
                 bool dropout_enabled, Rng* rng, ForwardCache& cache) {
    config.validate();
    const Eigen::Index N = batch.coords.rows();
    if (N == 0) throw InvalidInput("subject batch has no voxels");
    if (batch.coords.cols() != 3) throw InvalidInput("coords must be N x 3");
    if (batch.signals.size() != N) throw InvalidInput("signals length does not match voxel count");
    if (!batch.signals.allFinite()) throw InvalidInput("non-finite voxel signal");
    if (batch.memberships.size() != params.roi_tables.size())
        throw InvalidInput("batch atlas count does not match parameter tables");
    const std::size_t A = batch.memberships.size();
    for (std::size_t a = 0; a < A; ++a) {
        if (batch.memberships[a].rows != static_cast<std::size_t>(N))
            throw InvalidInput("membership row count does not match voxel count");
        if (static_cast<Eigen::Index>(batch.memberships[a].cols) != params.roi_tables[a].rows())
            throw InvalidInput("membership columns do not match the ROI table");
    }
    if (dropout_enabled && rng == nullptr) throw InvalidInput("dropout requires an RNG");

    // Coordinate path.
    coord_features(batch.coords, params, cache);
    if (dropout_enabled && config.ffn_dropout > 0.0) {
        cache.h1_mask = dropout_mask(*rng, cache.h1.rows(), cache.h1.cols(), config.ffn_dropout);
        cache.h1_eff = cache.h1.cwiseProduct(cache.h1_mask);
    } else {
        cache.h1_eff = cache.h1;
    }
    cache.C = (cache.h1_eff * params.coord_w2).rowwise() + params.coord_b2.transpose();

    // ROI embeddings.
    cache.E.clear();
    for (std::size_t a = 0; a < A; ++a) cache.E.push_back(embed_roi(batch.memberships[a], params.roi_tables[a]));

    // Fusion into the key input X.
    const int d_in = key_input_dim(config, A);
    if (params.key_proj.rows() != d_in) throw InvalidInput("key projection shape does not match fusion mode");
    cache.X.resize(N, d_in);
    switch (config.fusion) {
        case FusionMode::Concat: {
            cache.X.leftCols(config.d_c) = cache.C;
            for (std::size_t a = 0; a < A; ++a)
                cache.X.middleCols(config.d_c + static_cast<int>(a) * config.d_roi, config.d_roi) = cache.E[a];
            break;
        }
        case FusionMode::Gate: {
            cache.gate_mean.clear();
            cache.gate_h.clear();
            cache.gate_h_eff.clear();
            cache.gate_mask.clear();
            cache.gate_scores.resize(static_cast<Eigen::Index>(A));
            for (std::size_t a = 0; a < A; ++a) {
                Vector mean = cache.E[a].colwise().mean();
                Vector h = (params.gate_w1.transpose() * mean + params.gate_b1).array().tanh();
                Vector h_eff = h;
                Vector mask;
                if (dropout_enabled && config.ffn_dropout > 0.0) {
                    mask = dropout_mask(*rng, h.size(), 1, config.ffn_dropout).col(0);
                    h_eff = h.cwiseProduct(mask);
                }
                cache.gate_scores(static_cast<Eigen::Index>(a)) = params.gate_w2.dot(h_eff) + params.gate_b2(0);
                cache.gate_mean.push_back(std::move(mean));
                cache.gate_h.push_back(std::move(h));
                cache.gate_h_eff.push_back(std::move(h_eff));
                cache.gate_mask.push_back(std::move(mask));
            }
            cache.gate_alpha = softmax_rows(cache.gate_scores.transpose()).transpose();
            cache.fused = Matrix::Zero(N, config.d_roi);
            for (std::size_t a = 0; a < A; ++a)
                cache.fused += cache.gate_alpha(static_cast<Eigen::Index>(a)) * cache.E[a];
            cache.X.leftCols(config.d_c) = cache.C;
            cache.X.rightCols(config.d_roi) = cache.fused;
            break;
        }
        case FusionMode::VoxelGate: {
            cache.vg_rho.clear();
            cache.vg_h.clear();
            cache.vg_h_eff.clear();
            cache.vg_mask.clear();
            cache.vg_scores.resize(N, static_cast<Eigen::Index>(A));
            for (std::size_t a = 0; a < A; ++a) {
                Matrix rho = cache.E[a] * params.vg_reduce;
                Matrix h = ((rho * params.vg_w1).rowwise() + params.vg_b1.transpose()).array().tanh();
                Matrix h_eff = h;
                Matrix mask;
                if (dropout_enabled && config.ffn_dropout > 0.0) {
                    mask = dropout_mask(*rng, h.rows(), h.cols(), config.ffn_dropout);
                    h_eff = h.cwiseProduct(mask);
                }
                cache.vg_scores.col(static_cast<Eigen::Index>(a)) =
                    (h_eff * params.vg_w2).array() + params.vg_b2(0);
                cache.vg_rho.push_back(std::move(rho));
                cache.vg_h.push_back(std::move(h));
                cache.vg_h_eff.push_back(std::move(h_eff));
                cache.vg_mask.push_back(std::move(mask));
            }
            cache.vg_alpha = softmax_rows(cache.vg_scores);
            cache.fused = Matrix::Zero(N, config.d_roi);
            for (std::size_t a = 0; a < A; ++a)
                cache.fused += cache.vg_alpha.col(static_cast<Eigen::Index>(a)).asDiagonal() * cache.E[a];
            cache.X.leftCols(config.d_c) = cache.C;
            cache.X.rightCols(config.d_roi) = cache.fused;
            break;
        }
    }

    cache.K = cache.X * params.key_proj;
    cache.V = batch.signals * params.value_w.transpose();
    cache.V.rowwise() += params.value_b.transpose();

    const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(config.d_k));
    cache.blocks.assign(static_cast<std::size_t>(config.n_blocks), AttnBlock{});
    attention_block(params.queries, cache.K, cache.V, inv_sqrt_dk, dropout_enabled, config.attn_dropout, rng,
                    cache.blocks[0]);
    for (int b = 1; b < config.n_blocks; ++b) {
        if (static_cast<std::size_t>(b - 1) >= params.block_queries.size())
            throw InvalidInput("missing block query projection for block " + std::to_string(b));
        auto& blk = cache.blocks[static_cast<std::size_t>(b)];
        blk.query_in = cache.blocks[static_cast<std::size_t>(b - 1)].out;
        attention_block(blk.query_in * params.block_queries[static_cast<std::size_t>(b - 1)], cache.K, cache.V,
                        inv_sqrt_dk, dropout_enabled, config.attn_dropout, rng, blk);
    }

    cache.Z = (cache.blocks.back().out * params.out_w).rowwise() + params.out_b.transpose();
}

}  // namespace detail

Matrix encode_coords(const Matrix& coords, const EncoderParams& params) {
    detail::ForwardCache c;
    detail::coord_features(coords, params, c);
    return (c.h1 * params.coord_w2).rowwise() + params.coord_b2.transpose();
}

Matrix embed_roi(const MembershipMatrix& membership, const Matrix& table) {
    if (static_cast<Eigen::Index>(membership.cols) != table.rows())
        throw InvalidInput("membership has " + std::to_string(membership.cols) + " columns, table has " +
                           std::to_string(table.rows()) + " rows");
    Matrix out = Matrix::Zero(static_cast<Eigen::Index>(membership.rows), table.cols());
    for (std::size_t n = 0; n < membership.rows; ++n)
        if (membership.col_of_row[n] >= 0) out.row(static_cast<Eigen::Index>(n)) = table.row(membership.col_of_row[n]);
    return out;
}

namespace {

// Shared by the standalone fuse_* entry points.
Matrix concat_features(const Matrix& C, const std::vector<Matrix>& E, Eigen::Index extra_cols) {
    Matrix X(C.rows(), C.cols() + extra_cols);
    X.leftCols(C.cols()) = C;
    return X;
}

}  // namespace

Matrix fuse_concat(const Matrix& C, const std::vector<Matrix>& E, const Matrix& key_proj) {
    Eigen::Index total = C.cols();
    for (const auto& e : E) {
        if (e.rows() != C.rows()) throw InvalidInput("row count mismatch between coordinates and ROI embeddings");
        total += e.cols();
    }
    if (key_proj.rows() != total) throw InvalidInput("key projection rows do not match concatenated width");
    Matrix X(C.rows(), total);
    X.leftCols(C.cols()) = C;
    Eigen::Index off = C.cols();
    for (const auto& e : E) {
        X.middleCols(off, e.cols()) = e;
        off += e.cols();
    }
    return X * key_proj;
}

std::pair<Matrix, Vector> fuse_gate(const Matrix& C, const std::vector<Matrix>& E, const EncoderParams& params) {
    if (E.empty()) throw InvalidInput("gate fusion needs at least one atlas");
    const auto A = static_cast<Eigen::Index>(E.size());
    Vector scores(A);
    for (Eigen::Index a = 0; a < A; ++a) {
        Vector mean = E[static_cast<std::size_t>(a)].colwise().mean();
        Vector h = (params.gate_w1.transpose() * mean + params.gate_b1).array().tanh();
        scores(a) = params.gate_w2.dot(h) + params.gate_b2(0);
    }
    Vector alpha = detail::softmax_rows(scores.transpose()).transpose();
    Matrix fused = Matrix::Zero(C.rows(), E[0].cols());
    for (Eigen::Index a = 0; a < A; ++a) fused += alpha(a) * E[static_cast<std::size_t>(a)];
    Matrix X = concat_features(C, E, fused.cols());
    X.rightCols(fused.cols()) = fused;
    return {X * params.key_proj, alpha};
}

std::pair<Matrix, Matrix> fuse_voxel_gate(const Matrix& C, const std::vector<Matrix>& E,
                                          const EncoderParams& params) {
    if (E.empty()) throw InvalidInput("voxel-gate fusion needs at least one atlas");
    const auto A = static_cast<Eigen::Index>(E.size());
    Matrix scores(C.rows(), A);
    for (Eigen::Index a = 0; a < A; ++a) {
        Matrix rho = E[static_cast<std::size_t>(a)] * params.vg_reduce;
        Matrix h = ((rho * params.vg_w1).rowwise() + params.vg_b1.transpose()).array().tanh();
        scores.col(a) = (h * params.vg_w2).array() + params.vg_b2(0);
    }
    Matrix alpha = detail::softmax_rows(scores);
    Matrix fused = Matrix::Zero(C.rows(), E[0].cols());
    for (Eigen::Index a = 0; a < A; ++a)
        fused += alpha.col(a).asDiagonal() * E[static_cast<std::size_t>(a)];
    Matrix X = concat_features(C, E, fused.cols());
    X.rightCols(fused.cols()) = fused;
    return {X * params.key_proj, alpha};
}

Matrix project_values(const Vector& signals, const EncoderParams& params) {
    if (!signals.allFinite()) throw InvalidInput("non-finite voxel signal");
    Matrix V = signals * params.value_w.transpose();
    V.rowwise() += params.value_b.transpose();
    return V;
}

Matrix encode(const SubjectBatch& batch, const EncoderParams& params, const EncoderConfig& config,
              bool dropout_enabled, Rng* rng) {
    detail::ForwardCache cache;
    detail::run_forward(batch, params, config, dropout_enabled, rng, cache);
    return cache.Z;
}

double alignment_loss(const Matrix& z_fmri, const Matrix& z_clip) {
    if (z_fmri.rows() != z_clip.rows() || z_fmri.cols() != z_clip.cols())
        throw InvalidInput("token shapes differ");
    return (z_fmri - z_clip).squaredNorm() / static_cast<double>(z_fmri.size());
}

}  // namespace softroi

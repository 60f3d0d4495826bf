#include <cmath>
#include <numbers>

#include "encoder_forward.hpp"

namespace softroi {

namespace {

using detail::AttnBlock;
using detail::ForwardCache;

// dS = P . (dP - rowdot(dP, P)) for row-wise softmax P = softmax(S).
Matrix softmax_backward_rows(const Matrix& probs, const Matrix& dprobs) {
    Matrix ds(probs.rows(), probs.cols());
    for (Eigen::Index i = 0; i < probs.rows(); ++i) {
        const double inner = dprobs.row(i).dot(probs.row(i));
        ds.row(i) = probs.row(i).array() * (dprobs.row(i).array() - inner);
    }
    return ds;
}

}  // namespace

EncoderParams encoder_backward(const SubjectBatch& batch, const EncoderParams& params,
                               const EncoderConfig& config, const Matrix& z_clip, double* loss_out,
                               bool dropout_enabled, Rng* rng) {
    ForwardCache c;
    detail::run_forward(batch, params, config, dropout_enabled, rng, c);
    if (c.Z.rows() != z_clip.rows() || c.Z.cols() != z_clip.cols())
        throw InvalidInput("target token shape does not match encoder output");

    EncoderParams g = zeros_like(params);
    const Eigen::Index N = batch.coords.rows();
    const std::size_t A = batch.memberships.size();
    const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(config.d_k));

    const Matrix diff = c.Z - z_clip;
    if (loss_out) *loss_out = diff.squaredNorm() / static_cast<double>(diff.size());
    const Matrix dZ = 2.0 * diff / static_cast<double>(diff.size());

    // Output projection.
    g.out_w = c.blocks.back().out.transpose() * dZ;
    g.out_b = dZ.colwise().sum();
    Matrix dO = dZ * params.out_w.transpose();

    // Attention blocks, last to first.
    Matrix dK = Matrix::Zero(N, config.d_k);
    Matrix dV = Matrix::Zero(N, config.d_v);
    for (int b = config.n_blocks - 1; b >= 0; --b) {
        const AttnBlock& blk = c.blocks[static_cast<std::size_t>(b)];
        Matrix dP = dO * c.V.transpose();
        dV += blk.probs_eff.transpose() * dO;
        if (blk.attn_mask.size() > 0) dP = dP.cwiseProduct(blk.attn_mask).eval();
        Matrix dS = softmax_backward_rows(blk.probs, dP);
        Matrix dQ = dS * c.K * inv_sqrt_dk;
        if (b == 0) {
            dK += dS.transpose() * params.queries * inv_sqrt_dk;
            g.queries += dQ;
        } else {
            const Matrix& wq = params.block_queries[static_cast<std::size_t>(b - 1)];
            dK += dS.transpose() * (blk.query_in * wq) * inv_sqrt_dk;
            g.block_queries[static_cast<std::size_t>(b - 1)] += blk.query_in.transpose() * dQ;
            dO = dQ * wq.transpose();
        }
    }

    // Values: V = signals * w_v^T + b_v.
    g.value_w = dV.transpose() * batch.signals;
    g.value_b = dV.colwise().sum();

    // Keys: K = X * W_k.
    g.key_proj = c.X.transpose() * dK;
    Matrix dX = dK * params.key_proj.transpose();
    Matrix dC = dX.leftCols(config.d_c);

    std::vector<Matrix> dE(A);
    switch (config.fusion) {
        case FusionMode::Concat: {
            for (std::size_t a = 0; a < A; ++a)
                dE[a] = dX.middleCols(config.d_c + static_cast<int>(a) * config.d_roi, config.d_roi);
            break;
        }
        case FusionMode::Gate: {
            const Matrix dfused = dX.rightCols(config.d_roi);
            Vector dalpha(static_cast<Eigen::Index>(A));
            for (std::size_t a = 0; a < A; ++a) {
                dalpha(static_cast<Eigen::Index>(a)) = dfused.cwiseProduct(c.E[a]).sum();
                dE[a] = c.gate_alpha(static_cast<Eigen::Index>(a)) * dfused;
            }
            const double inner = dalpha.dot(c.gate_alpha);
            Vector dscores = c.gate_alpha.array() * (dalpha.array() - inner);
            for (std::size_t a = 0; a < A; ++a) {
                const double ds = dscores(static_cast<Eigen::Index>(a));
                g.gate_w2 += ds * c.gate_h_eff[a];
                g.gate_b2(0) += ds;
                Vector dh = ds * params.gate_w2;
                if (c.gate_mask[a].size() > 0) dh = dh.cwiseProduct(c.gate_mask[a]);
                Vector dpre = dh.cwiseProduct((1.0 - c.gate_h[a].array().square()).matrix());
                g.gate_w1 += c.gate_mean[a] * dpre.transpose();
                g.gate_b1 += dpre;
                Vector dmean = params.gate_w1 * dpre;
                dE[a].rowwise() += (dmean / static_cast<double>(N)).transpose();
            }
            break;
        }
        case FusionMode::VoxelGate: {
            const Matrix dfused = dX.rightCols(config.d_roi);
            Matrix dalpha(N, static_cast<Eigen::Index>(A));
            for (std::size_t a = 0; a < A; ++a) {
                dalpha.col(static_cast<Eigen::Index>(a)) = dfused.cwiseProduct(c.E[a]).rowwise().sum();
                dE[a] = c.vg_alpha.col(static_cast<Eigen::Index>(a)).asDiagonal() * dfused;
            }
            Matrix dscores = softmax_backward_rows(c.vg_alpha, dalpha);
            for (std::size_t a = 0; a < A; ++a) {
                Vector du = dscores.col(static_cast<Eigen::Index>(a));
                g.vg_w2 += c.vg_h_eff[a].transpose() * du;
                g.vg_b2(0) += du.sum();
                Matrix dh = du * params.vg_w2.transpose();
                if (c.vg_mask[a].size() > 0) dh = dh.cwiseProduct(c.vg_mask[a]);
                Matrix dpre = dh.cwiseProduct((1.0 - c.vg_h[a].array().square()).matrix());
                g.vg_w1 += c.vg_rho[a].transpose() * dpre;
                g.vg_b1 += dpre.colwise().sum();
                Matrix drho = dpre * params.vg_w1.transpose();
                g.vg_reduce += c.E[a].transpose() * drho;
                dE[a] += drho * params.vg_reduce.transpose();
            }
            break;
        }
    }

    // ROI tables: scatter rows back through the one-hot memberships.
    for (std::size_t a = 0; a < A; ++a) {
        const auto& cols = batch.memberships[a].col_of_row;
        for (Eigen::Index n = 0; n < N; ++n)
            if (cols[static_cast<std::size_t>(n)] >= 0)
                g.roi_tables[a].row(cols[static_cast<std::size_t>(n)]) += dE[a].row(n);
    }

    // Coordinate MLP.
    g.coord_w2 = c.h1_eff.transpose() * dC;
    g.coord_b2 = dC.colwise().sum();
    Matrix dh1 = dC * params.coord_w2.transpose();
    if (c.h1_mask.size() > 0) dh1 = dh1.cwiseProduct(c.h1_mask);
    Matrix dpre1 = dh1.cwiseProduct((1.0 - c.h1.array().square()).matrix());
    g.coord_w1 = c.phi.transpose() * dpre1;
    g.coord_b1 = dpre1.colwise().sum();
    Matrix dphi = dpre1 * params.coord_w1.transpose();

    // RFF frequencies (frozen in training, gradient still exact).
    const Eigen::Index n_rff = params.rff_freqs.rows();
    Matrix dtheta = dphi.leftCols(n_rff).cwiseProduct(c.theta.array().cos().matrix()) -
                    dphi.rightCols(n_rff).cwiseProduct(c.theta.array().sin().matrix());
    g.rff_freqs = 2.0 * std::numbers::pi * dtheta.transpose() * batch.coords;

    return g;
}

}  // namespace softroi

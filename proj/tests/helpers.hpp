#pragma once

// Shared fixtures for the unit and acceptance suites.

#include <random>

#include "softroi/encoder.hpp"

namespace softroi::testing {

inline EncoderConfig small_config(FusionMode mode = FusionMode::VoxelGate) {
    EncoderConfig c;
    c.d_c = c.d_k = 6;
    c.d_roi = 4;
    c.d_v = 5;
    c.d_red = 3;
    c.L = 3;
    c.D_out = 7;
    c.n_rff = 4;
    c.fusion = mode;
    return c;
}

inline MembershipMatrix random_membership(Rng& rng, std::size_t rows, std::size_t cols,
                                          double zero_fraction = 0.2) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<std::int32_t> col(0, static_cast<std::int32_t>(cols) - 1);
    MembershipMatrix m;
    m.rows = rows;
    m.cols = cols;
    m.col_of_row.resize(rows);
    for (auto& c : m.col_of_row) c = unit(rng) < zero_fraction ? -1 : col(rng);
    return m;
}

inline SubjectBatch random_batch(Rng& rng, Eigen::Index n_voxels, const std::vector<std::size_t>& atlas_cols) {
    std::uniform_real_distribution<double> coord(-1.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    SubjectBatch b;
    b.coords.resize(n_voxels, 3);
    for (Eigen::Index i = 0; i < n_voxels; ++i)
        for (int a = 0; a < 3; ++a) b.coords(i, a) = coord(rng);
    b.signals.resize(n_voxels);
    for (Eigen::Index i = 0; i < n_voxels; ++i) b.signals(i) = gauss(rng);
    for (std::size_t k : atlas_cols) b.memberships.push_back(random_membership(rng, static_cast<std::size_t>(n_voxels), k));
    return b;
}

}  // namespace softroi::testing

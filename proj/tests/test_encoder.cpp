#include <doctest.h>

#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "helpers.hpp"
#include "softroi/encoder.hpp"

using namespace softroi;
using softroi::testing::random_batch;
using softroi::testing::random_membership;
using softroi::testing::small_config;

namespace {

// Naive per-query per-voxel attention, kept independent of the Eigen path.
Matrix attention_oracle(const Matrix& Q, const Matrix& K, const Matrix& V, double dk) {
    const Eigen::Index L = Q.rows(), N = K.rows();
    Matrix out = Matrix::Zero(L, V.cols());
    for (Eigen::Index l = 0; l < L; ++l) {
        std::vector<double> s(static_cast<std::size_t>(N));
        double mx = -1e300;
        for (Eigen::Index n = 0; n < N; ++n) {
            double acc = 0.0;
            for (Eigen::Index d = 0; d < Q.cols(); ++d) acc += Q(l, d) * K(n, d);
            s[static_cast<std::size_t>(n)] = acc / std::sqrt(dk);
            mx = std::max(mx, s[static_cast<std::size_t>(n)]);
        }
        double z = 0.0;
        for (auto& v : s) z += std::exp(v - mx);
        for (Eigen::Index n = 0; n < N; ++n) {
            const double w = std::exp(s[static_cast<std::size_t>(n)] - mx) / z;
            for (Eigen::Index d = 0; d < V.cols(); ++d) out(l, d) += w * V(n, d);
        }
    }
    return out;
}

}  // namespace

TEST_CASE("normalize_coords maps endpoints to -1/+1 and singleton axes to 0") {
    VoxelIndexList v;
    v.coords = {{0, 0, 0}, {1, 0, 1}, {2, 0, 3}};
    VoxelGrid g{{3, 1, 4}, {1.0, 1.0, 1.0}};
    Matrix c = normalize_coords(v, g);
    CHECK(c(0, 0) == doctest::Approx(-1.0));
    CHECK(c(1, 0) == doctest::Approx(0.0));
    CHECK(c(2, 0) == doctest::Approx(1.0));
    CHECK(c(0, 1) == 0.0);  // dim-1 axis
    CHECK(c(1, 2) == doctest::Approx(2.0 / 3.0 - 1.0));
    CHECK(c(2, 2) == doctest::Approx(1.0));

    VoxelIndexList empty;
    CHECK_THROWS_AS(normalize_coords(empty, g), InvalidInput);
}

TEST_CASE("encode_coords is deterministic and constant for zero frequencies") {
    auto config = small_config();
    auto params = init_encoder_params(config, {5}, 3);

    Matrix coords(4, 3);
    coords << 0.1, -0.2, 0.3, 0.1, -0.2, 0.3, 0.5, 0.5, 0.5, -1.0, 0.0, 1.0;
    Matrix c1 = encode_coords(coords, params);
    Matrix c2 = encode_coords(coords, params);
    CHECK((c1 - c2).cwiseAbs().maxCoeff() == 0.0);
    CHECK(c1.row(0) == c1.row(1));  // identical inputs, identical rows

    params.rff_freqs.setZero();
    Matrix c3 = encode_coords(coords, params);
    for (Eigen::Index i = 1; i < c3.rows(); ++i) CHECK((c3.row(i) - c3.row(0)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("encode_coords matches a scalar-loop evaluation with one frequency") {
    EncoderConfig config = small_config();
    config.n_rff = 1;
    config.d_c = config.d_k = 2;
    auto params = init_encoder_params(config, {4}, 9);

    Matrix coords(2, 3);
    coords << 0.25, -0.5, 0.75, -0.1, 0.2, -0.3;
    Matrix got = encode_coords(coords, params);

    for (Eigen::Index n = 0; n < 2; ++n) {
        double theta = 0.0;
        for (int d = 0; d < 3; ++d) theta += params.rff_freqs(0, d) * coords(n, d);
        theta *= 2.0 * std::numbers::pi;
        const double phi[2] = {std::sin(theta), std::cos(theta)};
        for (int j = 0; j < 2; ++j) {
            double h[2];
            for (int k = 0; k < 2; ++k)
                h[k] = std::tanh(phi[0] * params.coord_w1(0, k) + phi[1] * params.coord_w1(1, k) +
                                 params.coord_b1(k));
            const double want = h[0] * params.coord_w2(0, j) + h[1] * params.coord_w2(1, j) + params.coord_b2(j);
            CHECK(got(n, j) == doctest::Approx(want).epsilon(1e-12));
        }
    }
}

TEST_CASE("embed_roi selects table rows and zeroes missing rows") {
    Rng rng(5);
    Matrix table = gaussian_matrix(rng, 6, 4);
    MembershipMatrix m;
    m.rows = 3;
    m.cols = 6;
    m.col_of_row = {2, -1, 5};
    Matrix e = embed_roi(m, table);
    CHECK(e.row(0) == table.row(2));
    CHECK(e.row(1).cwiseAbs().maxCoeff() == 0.0);
    CHECK(e.row(2) == table.row(5));

    // dense matmul oracle on random cases
    for (int rep = 0; rep < 10; ++rep) {
        auto mm = random_membership(rng, 12, 6);
        Matrix got = embed_roi(mm, table);
        Matrix want = mm.dense() * table;
        CHECK((got - want).cwiseAbs().maxCoeff() == 0.0);
    }

    MembershipMatrix bad;
    bad.rows = 1;
    bad.cols = 7;
    bad.col_of_row = {0};
    CHECK_THROWS_AS(embed_roi(bad, table), InvalidInput);
}

TEST_CASE("fuse_concat matches the per-row concat+matvec oracle") {
    Rng rng(17);
    const Eigen::Index N = 9;
    Matrix C = gaussian_matrix(rng, N, 3);
    std::vector<Matrix> E{gaussian_matrix(rng, N, 2), gaussian_matrix(rng, N, 2)};
    Matrix wk = gaussian_matrix(rng, 7, 4);
    Matrix K = fuse_concat(C, E, wk);
    for (Eigen::Index n = 0; n < N; ++n) {
        Vector z(7);
        z << C.row(n).transpose(), E[0].row(n).transpose(), E[1].row(n).transpose();
        Vector want = wk.transpose() * z;
        CHECK((K.row(n).transpose() - want).cwiseAbs().maxCoeff() < 1e-12);
    }

    // identity projection returns the concatenation itself
    Matrix id = Matrix::Identity(7, 7);
    Matrix Kid = fuse_concat(C, E, id);
    CHECK(Kid.leftCols(3) == C);
    CHECK(Kid.middleCols(3, 2) == E[0]);

    // zero embeddings: keys depend only on C
    std::vector<Matrix> zeroE{Matrix::Zero(N, 2), Matrix::Zero(N, 2)};
    Matrix Kz = fuse_concat(C, zeroE, wk);
    CHECK((Kz - C * wk.topRows(3)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("fuse_gate produces simplex weights and the weighted-sum keys") {
    auto config = small_config(FusionMode::Gate);
    Rng rng(31);

    SUBCASE("single atlas collapses to alpha = 1") {
        auto params = init_encoder_params(config, {5}, 2);
        Matrix C = gaussian_matrix(rng, 6, config.d_c);
        std::vector<Matrix> E{gaussian_matrix(rng, 6, config.d_roi)};
        auto [K, alpha] = fuse_gate(C, E, params);
        REQUIRE(alpha.size() == 1);
        CHECK(alpha(0) == 1.0);
        Matrix X(6, config.d_c + config.d_roi);
        X << C, E[0];
        CHECK((K - X * params.key_proj).cwiseAbs().maxCoeff() == 0.0);
    }

    SUBCASE("identical embeddings split the weight evenly") {
        auto params = init_encoder_params(config, {5, 5}, 2);
        Matrix C = gaussian_matrix(rng, 6, config.d_c);
        Matrix shared = gaussian_matrix(rng, 6, config.d_roi);
        auto [K, alpha] = fuse_gate(C, {shared, shared}, params);
        CHECK(alpha(0) == 0.5);
        CHECK(alpha(1) == 0.5);
    }

    SUBCASE("random case: weights sum to one, keys match the oracle") {
        auto params = init_encoder_params(config, {5, 4, 3}, 2);
        Matrix C = gaussian_matrix(rng, 8, config.d_c);
        std::vector<Matrix> E{gaussian_matrix(rng, 8, config.d_roi), gaussian_matrix(rng, 8, config.d_roi),
                              gaussian_matrix(rng, 8, config.d_roi)};
        auto [K, alpha] = fuse_gate(C, E, params);
        CHECK(std::abs(alpha.sum() - 1.0) < 1e-9);
        for (Eigen::Index a = 0; a < 3; ++a) CHECK(alpha(a) > 0.0);
        Matrix fused = alpha(0) * E[0] + alpha(1) * E[1] + alpha(2) * E[2];
        Matrix X(8, config.d_c + config.d_roi);
        X << C, fused;
        CHECK((K - X * params.key_proj).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("fuse_voxel_gate weights are a per-voxel simplex") {
    auto config = small_config(FusionMode::VoxelGate);
    Rng rng(37);

    SUBCASE("single atlas gives all-ones weights") {
        auto params = init_encoder_params(config, {5}, 2);
        Matrix C = gaussian_matrix(rng, 4, config.d_c);
        std::vector<Matrix> E{gaussian_matrix(rng, 4, config.d_roi)};
        auto [K, alpha] = fuse_voxel_gate(C, E, params);
        CHECK((alpha.array() == 1.0).all());
    }

    SUBCASE("identical per-atlas embeddings give uniform rows") {
        auto params = init_encoder_params(config, {5, 5, 5}, 2);
        Matrix C = gaussian_matrix(rng, 4, config.d_c);
        Matrix shared = gaussian_matrix(rng, 4, config.d_roi);
        auto [K, alpha] = fuse_voxel_gate(C, {shared, shared, shared}, params);
        CHECK((alpha.array() - 1.0 / 3.0).abs().maxCoeff() < 1e-15);
    }

    SUBCASE("random case: rows sum to one and keys match per-voxel weighting") {
        auto params = init_encoder_params(config, {5, 4}, 2);
        const Eigen::Index N = 7;
        Matrix C = gaussian_matrix(rng, N, config.d_c);
        std::vector<Matrix> E{gaussian_matrix(rng, N, config.d_roi), gaussian_matrix(rng, N, config.d_roi)};
        auto [K, alpha] = fuse_voxel_gate(C, E, params);
        for (Eigen::Index n = 0; n < N; ++n) CHECK(std::abs(alpha.row(n).sum() - 1.0) < 1e-9);
        Matrix fused(N, config.d_roi);
        for (Eigen::Index n = 0; n < N; ++n)
            fused.row(n) = alpha(n, 0) * E[0].row(n) + alpha(n, 1) * E[1].row(n);
        Matrix X(N, config.d_c + config.d_roi);
        X << C, fused;
        CHECK((K - X * params.key_proj).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("project_values is the affine lift of the scalar signal") {
    auto config = small_config();
    auto params = init_encoder_params(config, {5}, 13);

    Vector zero = Vector::Zero(3);
    Matrix v0 = project_values(zero, params);
    for (Eigen::Index n = 0; n < 3; ++n) CHECK((v0.row(n).transpose() - params.value_b).cwiseAbs().maxCoeff() == 0.0);

    Vector x(2);
    x << 0.7, -1.3;
    Matrix vx = project_values(x, params);
    Matrix v2x = project_values((2.0 * x).eval(), params);
    CHECK(((v2x - v0.topRows(2)) - 2.0 * (vx - v0.topRows(2))).cwiseAbs().maxCoeff() < 1e-12);

    Rng rng(3);
    Vector r = gaussian_matrix(rng, 5, 1).col(0);
    Matrix vr = project_values(r, params);
    for (Eigen::Index n = 0; n < 5; ++n)
        CHECK((vr.row(n).transpose() - (params.value_w * r(n) + params.value_b)).cwiseAbs().maxCoeff() < 1e-12);

    Vector bad(1);
    bad << std::nan("");
    CHECK_THROWS_AS(project_values(bad, params), InvalidInput);
}

TEST_CASE("encode: single voxel makes every token the projected value") {
    auto config = small_config(FusionMode::Concat);
    auto params = init_encoder_params(config, {5}, 21);
    Rng rng(4);
    auto batch = random_batch(rng, 1, {5});
    Matrix z = encode(batch, params, config);
    REQUIRE(z.rows() == config.L);
    REQUIRE(z.cols() == config.D_out);
    Vector v1 = params.value_w * batch.signals(0) + params.value_b;
    Vector want = params.out_w.transpose() * v1 + params.out_b;
    for (Eigen::Index l = 0; l < config.L; ++l)
        CHECK((z.row(l).transpose() - want).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("encode: output shape is L x D_out regardless of voxel count") {
    auto config = small_config();
    auto params = init_encoder_params(config, {5, 3}, 21);
    Rng rng(8);
    for (Eigen::Index n : {1, 7, 40}) {
        auto batch = random_batch(rng, n, {5, 3});
        Matrix z = encode(batch, params, config);
        CHECK(z.rows() == config.L);
        CHECK(z.cols() == config.D_out);
        CHECK(z.allFinite());
    }
}

TEST_CASE("encode matches the naive attention oracle") {
    for (FusionMode mode : {FusionMode::Concat, FusionMode::Gate, FusionMode::VoxelGate}) {
        auto config = small_config(mode);
        auto params = init_encoder_params(config, {5, 3}, 77);
        Rng rng(100 + static_cast<int>(mode));
        auto batch = random_batch(rng, 11, {5, 3});

        Matrix C = encode_coords(batch.coords, params);
        std::vector<Matrix> E{embed_roi(batch.memberships[0], params.roi_tables[0]),
                              embed_roi(batch.memberships[1], params.roi_tables[1])};
        Matrix K;
        if (mode == FusionMode::Concat)
            K = fuse_concat(C, E, params.key_proj);
        else if (mode == FusionMode::Gate)
            K = fuse_gate(C, E, params).first;
        else
            K = fuse_voxel_gate(C, E, params).first;
        Matrix V = project_values(batch.signals, params);
        Matrix O = attention_oracle(params.queries, K, V, config.d_k);
        Matrix want = (O * params.out_w).rowwise() + params.out_b.transpose();

        Matrix got = encode(batch, params, config);
        CHECK((got - want).cwiseAbs().maxCoeff() < 1e-11);
    }
}

TEST_CASE("encode is invariant to voxel permutation") {
    auto config = small_config();
    auto params = init_encoder_params(config, {6, 4}, 55);
    Rng rng(9);
    const Eigen::Index N = 23;
    auto batch = random_batch(rng, N, {6, 4});
    Matrix base = encode(batch, params, config);

    std::vector<Eigen::Index> perm(static_cast<std::size_t>(N));
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);

    SubjectBatch shuffled = batch;
    for (Eigen::Index i = 0; i < N; ++i) {
        shuffled.coords.row(i) = batch.coords.row(perm[static_cast<std::size_t>(i)]);
        shuffled.signals(i) = batch.signals(perm[static_cast<std::size_t>(i)]);
        for (std::size_t a = 0; a < batch.memberships.size(); ++a)
            shuffled.memberships[a].col_of_row[static_cast<std::size_t>(i)] =
                batch.memberships[a].col_of_row[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])];
    }
    Matrix permuted = encode(shuffled, params, config);
    CHECK((base - permuted).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("single-atlas collapse: all fusion modes produce identical tokens") {
    auto concat_cfg = small_config(FusionMode::Concat);
    auto params = init_encoder_params(concat_cfg, {5}, 123);
    Rng rng(12);
    auto batch = random_batch(rng, 9, {5});

    Matrix z_concat = encode(batch, params, concat_cfg);
    auto gate_cfg = concat_cfg;
    gate_cfg.fusion = FusionMode::Gate;
    Matrix z_gate = encode(batch, params, gate_cfg);
    auto vg_cfg = concat_cfg;
    vg_cfg.fusion = FusionMode::VoxelGate;
    Matrix z_vg = encode(batch, params, vg_cfg);

    CHECK(z_concat == z_gate);
    CHECK(z_concat == z_vg);
}

TEST_CASE("encode is bit-reproducible and validates its inputs") {
    auto config = small_config();
    auto params = init_encoder_params(config, {5}, 1);
    Rng rng(2);
    auto batch = random_batch(rng, 6, {5});
    Matrix a = encode(batch, params, config);
    Matrix b = encode(batch, params, config);
    CHECK(a == b);

    SubjectBatch empty;
    empty.coords.resize(0, 3);
    empty.signals.resize(0);
    empty.memberships.push_back(random_membership(rng, 0, 5));
    CHECK_THROWS_AS(encode(empty, params, config), InvalidInput);

    SubjectBatch mismatched = batch;
    mismatched.memberships[0].rows = 5;
    mismatched.memberships[0].col_of_row.resize(5);
    CHECK_THROWS_AS(encode(mismatched, params, config), InvalidInput);

    CHECK_THROWS_AS(encode(batch, params, config, /*dropout_enabled=*/true, nullptr), InvalidInput);
}

TEST_CASE("alignment loss is the mean squared entry difference") {
    Rng rng(44);
    Matrix z = gaussian_matrix(rng, 4, 6);
    CHECK(alignment_loss(z, z) == 0.0);
    Matrix shifted = z.array() + 1.0;
    CHECK(alignment_loss(shifted, z) == doctest::Approx(1.0).epsilon(1e-12));

    Matrix other = gaussian_matrix(rng, 4, 6);
    double want = 0.0;
    for (Eigen::Index i = 0; i < 4; ++i)
        for (Eigen::Index j = 0; j < 6; ++j) want += (z(i, j) - other(i, j)) * (z(i, j) - other(i, j));
    want /= 24.0;
    CHECK(alignment_loss(z, other) == doctest::Approx(want).epsilon(1e-12));

    Matrix wrong = gaussian_matrix(rng, 3, 6);
    CHECK_THROWS_AS(alignment_loss(z, wrong), InvalidInput);
}

#include "softroi/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace softroi {

void SyntheticDatasetSpec::validate() const {
    if (n_subjects < 1 || n_atlases < 1 || labels_per_atlas < 1 || samples_per_subject < 1 || latent_dim < 1)
        throw InvalidInput("synthetic dataset counts must all be >= 1");
    if (static_cast<int>(voxels_per_subject.size()) != n_subjects)
        throw InvalidInput("voxels_per_subject must list one count per subject");
    for (int v : voxels_per_subject)
        if (v < 1) throw InvalidInput("every subject needs at least one voxel");
    if (noise_sigma < 0.0) throw InvalidInput("noise_sigma must be nonnegative");
}

SubjectBatch SubjectData::batch(std::size_t sample) const {
    SubjectBatch b;
    b.coords = coords;
    b.signals = signals.at(sample);
    b.memberships = memberships;
    return b;
}

std::vector<std::size_t> SyntheticDataset::atlas_cols() const {
    std::vector<std::size_t> out;
    for (const auto& s : spaces) out.push_back(s.size());
    return out;
}

namespace {

// Smallest near-cubic grid holding at least n voxels.
VoxelGrid grid_for(int n_voxels, double spacing) {
    int side = 1;
    while (side * side * side < n_voxels) ++side;
    VoxelGrid g;
    g.dims = {side, side, side};
    g.spacing = {spacing, spacing, spacing};
    return g;
}

SubjectMask random_mask(Rng& rng, const VoxelGrid& grid, int n_voxels) {
    std::vector<std::size_t> order(grid.voxel_count());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    SubjectMask m;
    m.grid = grid;
    m.member.assign(grid.voxel_count(), 0);
    for (int i = 0; i < n_voxels; ++i) m.member[order[static_cast<std::size_t>(i)]] = 1;
    return m;
}

}  // namespace

SyntheticDataset generate_synthetic_dataset(const SyntheticDatasetSpec& spec, int token_count, int token_dim) {
    spec.validate();
    if (token_count < 1 || token_dim < 1) throw InvalidInput("token shape must be positive");
    Rng rng(spec.seed);

    SyntheticDataset ds;
    ds.spec = spec;

    // Shared target map: token row l of reshape(G z) is (q_l . z) * u, a
    // rank-structured random G. The value path of the encoder emits one
    // scalar mixture per token, so this family is the realizable one; the
    // 0.25 scale keeps the fit reachable within the desk step budget.
    Vector u = gaussian_matrix(rng, token_dim, 1, 0.25).col(0);
    Matrix q = gaussian_matrix(rng, token_count, spec.latent_dim, 1.0 / std::sqrt(spec.latent_dim));

    // Source atlases on a shared reference grid; subject grids differ in
    // spacing so the resampling path is exercised for real.
    const VoxelGrid ref_grid{{6, 6, 6}, {1.0, 1.0, 1.0}};
    std::uniform_int_distribution<std::int32_t> label_dist(0, spec.labels_per_atlas);
    std::vector<LabelVolume> atlases;
    for (int a = 0; a < spec.n_atlases; ++a) {
        LabelVolume vol;
        vol.grid = ref_grid;
        vol.labels.resize(ref_grid.voxel_count());
        for (auto& l : vol.labels) l = label_dist(rng);
        atlases.push_back(std::move(vol));
    }

    // Subject geometry.
    struct Geometry {
        VoxelGrid grid;
        VoxelIndexList voxels;
        std::vector<LabelVolume> resampled;  // per atlas
    };
    std::vector<Geometry> geoms;
    for (int s = 0; s < spec.n_subjects; ++s) {
        Geometry g;
        g.grid = grid_for(spec.voxels_per_subject[static_cast<std::size_t>(s)], 0.8 + 0.1 * s);
        auto mask = random_mask(rng, g.grid, spec.voxels_per_subject[static_cast<std::size_t>(s)]);
        g.voxels = extract_mask_voxels(mask);
        for (const auto& atlas : atlases) g.resampled.push_back(resample_nearest(atlas, g.grid));
        geoms.push_back(std::move(g));
    }

    // Global label spaces from the in-mask label unions.
    for (int a = 0; a < spec.n_atlases; ++a) {
        std::vector<std::vector<std::int32_t>> per_subject;
        for (const auto& g : geoms) {
            std::vector<std::int32_t> present;
            for (const auto& c : g.voxels.coords) present.push_back(g.resampled[static_cast<std::size_t>(a)].at(c[0], c[1], c[2]));
            per_subject.push_back(std::move(present));
        }
        ds.spaces.push_back(build_global_label_space("atlas" + std::to_string(a), per_subject));
    }

    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int s = 0; s < spec.n_subjects; ++s) {
        const auto& g = geoms[static_cast<std::size_t>(s)];
        SubjectData subj;
        subj.name = "S" + std::to_string(s + 1);
        subj.grid = g.grid;
        subj.voxels = g.voxels;
        subj.coords = normalize_coords(g.voxels, g.grid);
        for (int a = 0; a < spec.n_atlases; ++a)
            subj.memberships.push_back(build_membership_matrix(g.resampled[static_cast<std::size_t>(a)], g.voxels,
                                                               ds.spaces[static_cast<std::size_t>(a)]));

        const auto n = static_cast<Eigen::Index>(g.voxels.count());
        Matrix readout = gaussian_matrix(rng, n, spec.latent_dim, 1.0 / std::sqrt(spec.latent_dim));
        for (int i = 0; i < spec.samples_per_subject; ++i) {
            Vector z(spec.latent_dim);
            for (int d = 0; d < spec.latent_dim; ++d) z(d) = gauss(rng);
            subj.targets.push_back((q * z) * u.transpose());
            Vector x = readout * z;
            if (spec.noise_sigma > 0.0)
                for (Eigen::Index v = 0; v < n; ++v) x(v) += spec.noise_sigma * gauss(rng);
            subj.signals.push_back(std::move(x));
        }
        ds.subjects.push_back(std::move(subj));
    }
    return ds;
}

}  // namespace softroi

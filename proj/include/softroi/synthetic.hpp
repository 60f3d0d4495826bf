#pragma once

#include <string>
#include <vector>

#include "softroi/encoder.hpp"

namespace softroi {

// Stand-in for a real multi-subject acquisition: per-subject label grids,
// masks and membership matrices are synthesized through the atlas pipeline,
// and each sample pairs a voxel signal vector with a target token matrix
// driven by a shared low-dimensional latent.
struct SyntheticDatasetSpec {
    int n_subjects = 3;
    std::vector<int> voxels_per_subject = {60, 80, 100};  // deliberately unequal
    int n_atlases = 2;
    int labels_per_atlas = 6;
    int samples_per_subject = 160;
    int latent_dim = 4;
    double noise_sigma = 0.0;
    std::uint64_t seed = 42;

    void validate() const;
};

struct SubjectData {
    std::string name;
    VoxelGrid grid;
    VoxelIndexList voxels;
    Matrix coords;  // normalized, N x 3
    std::vector<MembershipMatrix> memberships;
    std::vector<Vector> signals;  // one per sample
    std::vector<Matrix> targets;  // one per sample, L x D_out

    std::size_t n_samples() const { return signals.size(); }
    SubjectBatch batch(std::size_t sample) const;
};

struct SyntheticDataset {
    SyntheticDatasetSpec spec;
    std::vector<GlobalLabelSpace> spaces;  // per atlas
    std::vector<SubjectData> subjects;

    std::vector<std::size_t> atlas_cols() const;
};

// Deterministic in the spec seed. Targets are reshape(G z) for a fixed
// random map G shared across subjects; signals are a subject-specific
// random readout of the same latent plus optional Gaussian noise.
SyntheticDataset generate_synthetic_dataset(const SyntheticDatasetSpec& spec, int token_count, int token_dim);

}  // namespace softroi

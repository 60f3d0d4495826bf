#include "softroi/atlas.hpp"

#include <algorithm>
#include <set>

namespace softroi {

Matrix MembershipMatrix::dense() const {
    Matrix m = Matrix::Zero(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (std::size_t i = 0; i < rows; ++i)
        if (col_of_row[i] >= 0) m(static_cast<Eigen::Index>(i), col_of_row[i]) = 1.0;
    return m;
}

GlobalLabelSpace build_global_label_space(const std::string& atlas_id,
                                          const std::vector<std::vector<std::int32_t>>& per_subject_label_sets) {
    if (per_subject_label_sets.empty()) throw InvalidInput("no subject label sets given");
    std::set<std::int32_t> merged;
    for (const auto& s : per_subject_label_sets)
        for (std::int32_t v : s) {
            if (v < 0) throw InvalidInput("negative ROI label " + std::to_string(v));
            if (v > 0) merged.insert(v);
        }
    if (merged.empty()) throw InvalidInput("empty label space: only background labels present");
    GlobalLabelSpace out;
    out.atlas_id = atlas_id;
    out.label_ids.assign(merged.begin(), merged.end());
    return out;
}

MembershipMatrix build_membership_matrix(const LabelVolume& vol, const VoxelIndexList& voxels,
                                         const GlobalLabelSpace& space) {
    vol.validate();
    MembershipMatrix out;
    out.rows = voxels.count();
    out.cols = space.size();
    out.col_of_row.resize(out.rows);
    for (std::size_t n = 0; n < voxels.count(); ++n) {
        const auto& c = voxels.coords[n];
        if (c[0] < 0 || c[0] >= vol.grid.dims[0] || c[1] < 0 || c[1] >= vol.grid.dims[1] || c[2] < 0 ||
            c[2] >= vol.grid.dims[2])
            throw InvalidInput("voxel coordinate outside the label volume");
        const std::int32_t label = vol.at(c[0], c[1], c[2]);
        if (label == 0) {
            out.col_of_row[n] = -1;
            continue;
        }
        auto it = std::lower_bound(space.label_ids.begin(), space.label_ids.end(), label);
        // A label missing from the global space yields an all-zero row.
        out.col_of_row[n] = (it != space.label_ids.end() && *it == label)
                                ? static_cast<std::int32_t>(it - space.label_ids.begin())
                                : -1;
    }
    return out;
}

}  // namespace softroi

#pragma once

#include <string>
#include <vector>

#include "softroi/grid.hpp"

namespace softroi {

// Ordered union of non-zero ROI labels across subjects; fixes the column
// semantics shared by every membership matrix of this atlas.
struct GlobalLabelSpace {
    std::string atlas_id;
    std::vector<std::int32_t> label_ids;  // sorted ascending, distinct, > 0

    std::size_t size() const { return label_ids.size(); }
};

// One-hot-or-zero voxel x ROI indicator, stored as one column index per
// row (-1 for an all-zero row).
struct MembershipMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<std::int32_t> col_of_row;  // length == rows, values in [-1, cols)

    // Dense materialization for the math modules and oracle checks.
    Matrix dense() const;
};

GlobalLabelSpace build_global_label_space(const std::string& atlas_id,
                                          const std::vector<std::vector<std::int32_t>>& per_subject_label_sets);

MembershipMatrix build_membership_matrix(const LabelVolume& vol, const VoxelIndexList& voxels,
                                         const GlobalLabelSpace& space);

}  // namespace softroi

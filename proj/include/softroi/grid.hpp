#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "softroi/common.hpp"

namespace softroi {

struct VoxelGrid {
    std::array<int, 3> dims{1, 1, 1};     // (nx, ny, nz)
    std::array<double, 3> spacing{1.0, 1.0, 1.0};  // mm per axis

    std::size_t voxel_count() const {
        return static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
    }
    bool operator==(const VoxelGrid&) const = default;

    void validate() const;
};

// Integer ROI labels on a grid, row-major over (i, j, k). 0 = background.
struct LabelVolume {
    VoxelGrid grid;
    std::vector<std::int32_t> labels;

    std::int32_t at(int i, int j, int k) const {
        return labels[(static_cast<std::size_t>(i) * grid.dims[1] + j) * grid.dims[2] + k];
    }
    void validate() const;
};

struct SubjectMask {
    VoxelGrid grid;
    std::vector<std::uint8_t> member;  // one flag per voxel, row-major

    void validate() const;
};

// In-mask voxel coordinates in strictly increasing lexicographic (i, j, k)
// order. Row n of every membership matrix refers to coords[n].
struct VoxelIndexList {
    std::vector<std::array<int, 3>> coords;

    std::size_t count() const { return coords.size(); }
};

// Nearest-neighbor label resampling onto dst_grid. Voxel centers sit at
// index * spacing; distance ties go to the lower source index per axis.
LabelVolume resample_nearest(const LabelVolume& src, const VoxelGrid& dst_grid);

// All set voxels of the mask in lexicographic (i, j, k) order.
VoxelIndexList extract_mask_voxels(const SubjectMask& mask);

}  // namespace softroi

#include "softroi/grid.hpp"

#include <cmath>

namespace softroi {

void VoxelGrid::validate() const {
    for (int axis = 0; axis < 3; ++axis) {
        if (dims[axis] < 1)
            throw InvalidInput("degenerate grid: dim " + std::to_string(axis) + " is " +
                               std::to_string(dims[axis]));
        if (!(spacing[axis] > 0.0))
            throw InvalidInput("grid spacing must be positive on axis " + std::to_string(axis));
    }
}

void LabelVolume::validate() const {
    grid.validate();
    if (labels.size() != grid.voxel_count())
        throw InvalidInput("label volume has " + std::to_string(labels.size()) + " values, grid holds " +
                           std::to_string(grid.voxel_count()));
    for (std::int32_t v : labels)
        if (v < 0) throw InvalidInput("negative label value");
}

void SubjectMask::validate() const {
    grid.validate();
    if (member.size() != grid.voxel_count())
        throw InvalidInput("mask size does not match its grid");
}

namespace {

// Index of the source voxel center nearest to continuous coordinate x,
// ties resolved toward the lower index.
int nearest_index(double x, double src_spacing, int src_dim) {
    double best = std::abs(x - 0.0);
    int best_idx = 0;
    for (int i = 1; i < src_dim; ++i) {
        const double d = std::abs(x - i * src_spacing);
        if (d < best) {
            best = d;
            best_idx = i;
        }
    }
    return best_idx;
}

}  // namespace

LabelVolume resample_nearest(const LabelVolume& src, const VoxelGrid& dst_grid) {
    src.validate();
    dst_grid.validate();

    if (src.grid == dst_grid) return src;

    // Precompute the per-axis index maps; the volume loop is then a gather.
    std::array<std::vector<int>, 3> index_map;
    for (int axis = 0; axis < 3; ++axis) {
        index_map[axis].resize(dst_grid.dims[axis]);
        for (int i = 0; i < dst_grid.dims[axis]; ++i)
            index_map[axis][i] =
                nearest_index(i * dst_grid.spacing[axis], src.grid.spacing[axis], src.grid.dims[axis]);
    }

    LabelVolume out;
    out.grid = dst_grid;
    out.labels.resize(dst_grid.voxel_count());
    std::size_t pos = 0;
    for (int i = 0; i < dst_grid.dims[0]; ++i)
        for (int j = 0; j < dst_grid.dims[1]; ++j)
            for (int k = 0; k < dst_grid.dims[2]; ++k)
                out.labels[pos++] = src.at(index_map[0][i], index_map[1][j], index_map[2][k]);
    return out;
}

VoxelIndexList extract_mask_voxels(const SubjectMask& mask) {
    mask.validate();
    VoxelIndexList out;
    std::size_t pos = 0;
    for (int i = 0; i < mask.grid.dims[0]; ++i)
        for (int j = 0; j < mask.grid.dims[1]; ++j)
            for (int k = 0; k < mask.grid.dims[2]; ++k, ++pos)
                if (mask.member[pos]) out.coords.push_back({i, j, k});
    if (out.coords.empty()) throw InvalidInput("empty mask: no voxels set");
    return out;
}

}  // namespace softroi

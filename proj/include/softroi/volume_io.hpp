#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <utility>

#include <json.hpp>

#include "softroi/atlas.hpp"
#include "softroi/grid.hpp"

namespace softroi {

// All three formats share the same layout: a single-line JSON header,
// a newline, then a little-endian binary payload.
//
//   gridvol1  {magic, dims, spacing, dtype:"i32"|"u8"}  row-major voxels
//   memb1     {magic, rows, cols, atlas_id, label_ids}  i32 column index per row
//   vidx1     {magic, count}                            i32 (i,j,k) triples
//
// `extra` fields are merged into the header; readers ignore unknown keys.

void write_label_volume(std::ostream& os, const LabelVolume& vol,
                        const nlohmann::json& extra = nlohmann::json::object());
LabelVolume read_label_volume(std::istream& is);

void write_subject_mask(std::ostream& os, const SubjectMask& mask,
                        const nlohmann::json& extra = nlohmann::json::object());
SubjectMask read_subject_mask(std::istream& is);

void write_membership(std::ostream& os, const MembershipMatrix& m, const GlobalLabelSpace& space,
                      const nlohmann::json& extra = nlohmann::json::object());
std::pair<MembershipMatrix, GlobalLabelSpace> read_membership(std::istream& is);

void write_voxel_indices(std::ostream& os, const VoxelIndexList& v,
                         const nlohmann::json& extra = nlohmann::json::object());
VoxelIndexList read_voxel_indices(std::istream& is);

// File-path conveniences.
void save_file(const std::string& path, const std::function<void(std::ostream&)>& writer);
nlohmann::json read_header_line(std::istream& is, const std::string& expected_magic);

}  // namespace softroi

#include "softroi/volume_io.hpp"

#include <fstream>
#include <functional>
#include <istream>
#include <ostream>

namespace softroi {

namespace {

using nlohmann::json;

void put_i32(std::ostream& os, std::int32_t v) {
    const auto u = static_cast<std::uint32_t>(v);
    const char bytes[4] = {static_cast<char>(u & 0xff), static_cast<char>((u >> 8) & 0xff),
                           static_cast<char>((u >> 16) & 0xff), static_cast<char>((u >> 24) & 0xff)};
    os.write(bytes, 4);
}

std::int32_t get_i32(std::istream& is) {
    unsigned char bytes[4];
    if (!is.read(reinterpret_cast<char*>(bytes), 4)) throw IoError("truncated payload");
    const std::uint32_t u = static_cast<std::uint32_t>(bytes[0]) | (static_cast<std::uint32_t>(bytes[1]) << 8) |
                            (static_cast<std::uint32_t>(bytes[2]) << 16) |
                            (static_cast<std::uint32_t>(bytes[3]) << 24);
    return static_cast<std::int32_t>(u);
}

void write_header(std::ostream& os, json header, const json& extra) {
    for (auto it = extra.begin(); it != extra.end(); ++it) header[it.key()] = it.value();
    os << header.dump() << '\n';
}

json grid_header(const char* magic, const VoxelGrid& g, const char* dtype) {
    return json{{"magic", magic},
                {"dims", {g.dims[0], g.dims[1], g.dims[2]}},
                {"spacing", {g.spacing[0], g.spacing[1], g.spacing[2]}},
                {"dtype", dtype}};
}

VoxelGrid grid_from_header(const json& h) {
    VoxelGrid g;
    const auto& dims = h.at("dims");
    const auto& spacing = h.at("spacing");
    if (dims.size() != 3 || spacing.size() != 3) throw IoError("header dims/spacing must have 3 entries");
    for (int a = 0; a < 3; ++a) {
        g.dims[a] = dims[a].get<int>();
        g.spacing[a] = spacing[a].get<double>();
    }
    g.validate();
    return g;
}

}  // namespace

nlohmann::json read_header_line(std::istream& is, const std::string& expected_magic) {
    std::string line;
    if (!std::getline(is, line)) throw IoError("missing header line");
    json h;
    try {
        h = json::parse(line);
    } catch (const json::parse_error& e) {
        throw IoError(std::string("bad header JSON: ") + e.what());
    }
    if (!h.contains("magic") || h["magic"].get<std::string>() != expected_magic)
        throw IoError("expected magic '" + expected_magic + "'");
    return h;
}

void write_label_volume(std::ostream& os, const LabelVolume& vol, const nlohmann::json& extra) {
    vol.validate();
    write_header(os, grid_header("gridvol1", vol.grid, "i32"), extra);
    for (std::int32_t v : vol.labels) put_i32(os, v);
}

LabelVolume read_label_volume(std::istream& is) {
    const json h = read_header_line(is, "gridvol1");
    if (h.at("dtype").get<std::string>() != "i32") throw IoError("label volume must have dtype i32");
    LabelVolume vol;
    vol.grid = grid_from_header(h);
    vol.labels.resize(vol.grid.voxel_count());
    for (auto& v : vol.labels) v = get_i32(is);
    vol.validate();
    return vol;
}

void write_subject_mask(std::ostream& os, const SubjectMask& mask, const nlohmann::json& extra) {
    mask.validate();
    write_header(os, grid_header("gridvol1", mask.grid, "u8"), extra);
    os.write(reinterpret_cast<const char*>(mask.member.data()),
             static_cast<std::streamsize>(mask.member.size()));
}

SubjectMask read_subject_mask(std::istream& is) {
    const json h = read_header_line(is, "gridvol1");
    if (h.at("dtype").get<std::string>() != "u8") throw IoError("mask must have dtype u8");
    SubjectMask mask;
    mask.grid = grid_from_header(h);
    mask.member.resize(mask.grid.voxel_count());
    if (!is.read(reinterpret_cast<char*>(mask.member.data()), static_cast<std::streamsize>(mask.member.size())))
        throw IoError("truncated mask payload");
    return mask;
}

void write_membership(std::ostream& os, const MembershipMatrix& m, const GlobalLabelSpace& space,
                      const nlohmann::json& extra) {
    if (m.cols != space.size()) throw InvalidInput("membership columns do not match the label space");
    write_header(os,
                 json{{"magic", "memb1"},
                      {"rows", m.rows},
                      {"cols", m.cols},
                      {"atlas_id", space.atlas_id},
                      {"label_ids", space.label_ids}},
                 extra);
    for (std::int32_t c : m.col_of_row) put_i32(os, c);
}

std::pair<MembershipMatrix, GlobalLabelSpace> read_membership(std::istream& is) {
    const json h = read_header_line(is, "memb1");
    GlobalLabelSpace space;
    space.atlas_id = h.at("atlas_id").get<std::string>();
    space.label_ids = h.at("label_ids").get<std::vector<std::int32_t>>();
    MembershipMatrix m;
    m.rows = h.at("rows").get<std::size_t>();
    m.cols = h.at("cols").get<std::size_t>();
    if (m.cols != space.label_ids.size()) throw IoError("cols does not match label_ids length");
    m.col_of_row.resize(m.rows);
    for (auto& c : m.col_of_row) {
        c = get_i32(is);
        if (c < -1 || c >= static_cast<std::int32_t>(m.cols)) throw IoError("column index out of range");
    }
    return {std::move(m), std::move(space)};
}

void write_voxel_indices(std::ostream& os, const VoxelIndexList& v, const nlohmann::json& extra) {
    write_header(os, json{{"magic", "vidx1"}, {"count", v.count()}}, extra);
    for (const auto& c : v.coords) {
        put_i32(os, c[0]);
        put_i32(os, c[1]);
        put_i32(os, c[2]);
    }
}

VoxelIndexList read_voxel_indices(std::istream& is) {
    const json h = read_header_line(is, "vidx1");
    VoxelIndexList v;
    v.coords.resize(h.at("count").get<std::size_t>());
    for (auto& c : v.coords) {
        c[0] = get_i32(is);
        c[1] = get_i32(is);
        c[2] = get_i32(is);
    }
    return v;
}

void save_file(const std::string& path, const std::function<void(std::ostream&)>& writer) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open " + path + " for writing");
    writer(os);
    if (!os) throw IoError("write failed: " + path);
}

}  // namespace softroi

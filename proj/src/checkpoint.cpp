#include "softroi/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace softroi {

using nlohmann::json;

json encoder_config_to_json(const EncoderConfig& c) {
    return json{{"d_c", c.d_c},       {"d_k", c.d_k},
                {"d_roi", c.d_roi},   {"d_v", c.d_v},
                {"d_red", c.d_red},   {"L", c.L},
                {"D_out", c.D_out},   {"n_rff", c.n_rff},
                {"n_blocks", c.n_blocks},
                {"fusion_mode", to_string(c.fusion)},
                {"attn_dropout", c.attn_dropout},
                {"ffn_dropout", c.ffn_dropout}};
}

EncoderConfig encoder_config_from_json(const json& j) {
    EncoderConfig c;
    c.d_c = j.value("d_c", c.d_c);
    c.d_k = j.value("d_k", c.d_k);
    c.d_roi = j.value("d_roi", c.d_roi);
    c.d_v = j.value("d_v", c.d_v);
    c.d_red = j.value("d_red", c.d_red);
    c.L = j.value("L", c.L);
    c.D_out = j.value("D_out", c.D_out);
    c.n_rff = j.value("n_rff", c.n_rff);
    c.n_blocks = j.value("n_blocks", c.n_blocks);
    if (j.contains("fusion_mode")) c.fusion = fusion_from_string(j["fusion_mode"].get<std::string>());
    c.attn_dropout = j.value("attn_dropout", c.attn_dropout);
    c.ffn_dropout = j.value("ffn_dropout", c.ffn_dropout);
    c.validate();
    return c;
}

namespace {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

void write_f64_le(std::ostream& os, const double* data, std::size_t count) {
    if constexpr (std::endian::native == std::endian::little) {
        os.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(count * sizeof(double)));
    } else {
        for (std::size_t i = 0; i < count; ++i) {
            std::uint64_t u;
            std::memcpy(&u, &data[i], 8);
            char bytes[8];
            for (int b = 0; b < 8; ++b) bytes[b] = static_cast<char>((u >> (8 * b)) & 0xff);
            os.write(bytes, 8);
        }
    }
}

void read_f64_le(std::istream& is, double* data, std::size_t count) {
    if constexpr (std::endian::native == std::endian::little) {
        if (!is.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(count * sizeof(double))))
            throw IoError("truncated checkpoint payload");
    } else {
        for (std::size_t i = 0; i < count; ++i) {
            unsigned char bytes[8];
            if (!is.read(reinterpret_cast<char*>(bytes), 8)) throw IoError("truncated checkpoint payload");
            std::uint64_t u = 0;
            for (int b = 0; b < 8; ++b) u |= static_cast<std::uint64_t>(bytes[b]) << (8 * b);
            std::memcpy(&data[i], &u, 8);
        }
    }
}

}  // namespace

void write_checkpoint(std::ostream& os, const Checkpoint& ckpt) {
    auto refs = ckpt.params.tensors();
    json manifest{{"magic", "srckpt1"},
                  {"seed", ckpt.seed},
                  {"config", encoder_config_to_json(ckpt.config)},
                  {"atlas_cols", ckpt.atlas_cols},
                  {"meta", ckpt.meta}};
    json tensors = json::array();
    for (const auto& t : refs) tensors.push_back({{"name", t.name}, {"shape", {t.rows, t.cols}}});
    manifest["tensors"] = tensors;
    os << manifest.dump() << '\n';
    for (const auto& t : refs) write_f64_le(os, t.data, static_cast<std::size_t>(t.rows * t.cols));
}

Checkpoint read_checkpoint(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw IoError("missing checkpoint manifest");
    json manifest;
    try {
        manifest = json::parse(line);
    } catch (const json::parse_error& e) {
        throw IoError(std::string("bad checkpoint manifest: ") + e.what());
    }
    if (manifest.value("magic", "") != "srckpt1") throw IoError("not a checkpoint file");

    Checkpoint ckpt;
    ckpt.seed = manifest.at("seed").get<std::uint64_t>();
    ckpt.config = encoder_config_from_json(manifest.at("config"));
    ckpt.atlas_cols = manifest.at("atlas_cols").get<std::vector<std::size_t>>();
    ckpt.meta = manifest.value("meta", json::object());
    // Build a correctly-shaped skeleton, then overwrite every tensor.
    ckpt.params = init_encoder_params(ckpt.config, ckpt.atlas_cols, 0);
    auto refs = ckpt.params.tensors();
    const auto& tensors = manifest.at("tensors");
    if (tensors.size() != refs.size()) throw IoError("checkpoint tensor list does not match this build");
    for (std::size_t i = 0; i < refs.size(); ++i) {
        const auto& entry = tensors[i];
        if (entry.at("name").get<std::string>() != refs[i].name)
            throw IoError("checkpoint tensor order mismatch at '" + refs[i].name + "'");
        const auto& shape = entry.at("shape");
        if (shape[0].get<Eigen::Index>() != refs[i].rows || shape[1].get<Eigen::Index>() != refs[i].cols)
            throw IoError("checkpoint tensor shape mismatch at '" + refs[i].name + "'");
        read_f64_le(is, refs[i].data, static_cast<std::size_t>(refs[i].rows * refs[i].cols));
    }
    return ckpt;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open " + path + " for writing");
    write_checkpoint(os, ckpt);
    if (!os) throw IoError("write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path);
    return read_checkpoint(is);
}

}  // namespace softroi

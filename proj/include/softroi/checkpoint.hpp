#pragma once

#include <iosfwd>
#include <string>

#include <json.hpp>

#include "softroi/encoder.hpp"

namespace softroi {

// Parameter checkpoint: one JSON manifest line (config, seed, tensor names
// and shapes, optional metadata) followed by the concatenated little-endian
// float64 payloads in manifest order.
struct Checkpoint {
    EncoderConfig config;
    std::vector<std::size_t> atlas_cols;
    std::uint64_t seed = 0;
    nlohmann::json meta = nlohmann::json::object();
    EncoderParams params;
};

nlohmann::json encoder_config_to_json(const EncoderConfig& config);
EncoderConfig encoder_config_from_json(const nlohmann::json& j);

void write_checkpoint(std::ostream& os, const Checkpoint& ckpt);
Checkpoint read_checkpoint(std::istream& is);

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace softroi

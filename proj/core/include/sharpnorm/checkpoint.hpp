#pragma once

#include <json.hpp>
#include <string>

#include "sharpnorm/param_store.hpp"

namespace sharpnorm {

// On-disk model format: "SHRP" magic, u32 LE version, u64 LE manifest byte
// length, UTF-8 JSON manifest, then total_params raw little-endian float64
// weights in flat parameter order. Bit-exact round trip.

inline constexpr char kCheckpointMagic[4] = {'S', 'H', 'R', 'P'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct LoadedCheckpoint {
  NetworkSpec net;
  ParamStore params;
  nlohmann::json manifest;
};

// extra_manifest entries are merged into the manifest next to the mandatory
// "net", "format_version" and "total_params" fields.
void save_checkpoint(const std::string& path, const NetworkSpec& net, const ParamStore& params,
                     const nlohmann::json& extra_manifest = nlohmann::json::object());

LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace sharpnorm

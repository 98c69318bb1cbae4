#pragma once

#include <json.hpp>

#include "sharpnorm/hessian.hpp"
#include "sharpnorm/sharpness.hpp"
#include "sharpnorm/trainer.hpp"

namespace sharpnorm {

// JSON (de)serialization of the public config/report types. All decoders
// validate and fail with format errors on malformed documents.

nlohmann::json layer_to_json(const LayerSpec& layer);
LayerSpec layer_from_json(const nlohmann::json& j);

nlohmann::json network_to_json(const NetworkSpec& net);
NetworkSpec network_from_json(const nlohmann::json& j);

nlohmann::json train_config_to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j);

nlohmann::json probe_config_to_json(const ProbeConfig& cfg);
ProbeConfig probe_config_from_json(const nlohmann::json& j);

nlohmann::json report_to_json(const SharpnessReport& rep);

nlohmann::json corruption_to_json(const CorruptionInfo& c);
CorruptionInfo corruption_from_json(const nlohmann::json& j);

// Read/parse helpers with io/format error mapping.
nlohmann::json load_json_file(const std::string& path);
void save_json_file(const std::string& path, const nlohmann::json& j);

}  // namespace sharpnorm

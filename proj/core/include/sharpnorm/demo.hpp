#pragma once

#include "sharpnorm/json_codec.hpp"
#include "sharpnorm/rescale.hpp"

namespace sharpnorm {

// Configuration for the rescaling demonstration: a small dense network with
// explicit weights, a sequence of rescaling operations, and a probe budget
// for the function-preservation check.
struct DemoConfig {
  NetworkSpec net;
  ParamStore params;
  std::vector<RescaleOp> ops;
  int probe_count = 100;
  std::uint64_t seed = 42;
  double lambda = 0.5;
  bool measure_metrics = true;  // exact-oracle curvature metrics before/after
  LossId loss = LossId::Nsce;
  double oracle_step = 1e-3;
};

DemoConfig demo_config_from_json(const nlohmann::json& j);
RescaleOp rescale_op_from_json(const nlohmann::json& j);
nlohmann::json rescale_op_to_json(const RescaleOp& op);

// Applies the ops in order, verifying function preservation on seeded random
// probe inputs, and reports per-layer norms (plus optional curvature metrics)
// before, after each step, and at the end.
nlohmann::json run_rescale_demo(const DemoConfig& cfg);

}  // namespace sharpnorm

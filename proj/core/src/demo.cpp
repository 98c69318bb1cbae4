#include "sharpnorm/demo.hpp"

#include <cmath>

#include "sharpnorm/error.hpp"
#include "sharpnorm/net_ops.hpp"
#include "sharpnorm/rng.hpp"
#include "sharpnorm/sharpness.hpp"

namespace sharpnorm {

using nlohmann::json;

RescaleOp rescale_op_from_json(const json& j) {
  RescaleOp op;
  const auto kind = j.value("kind", std::string("row_col"));
  if (kind == "row_col") {
    op.kind = RescaleOp::Kind::RowCol;
    op.index = j.value("index", 0);
  } else if (kind == "layer_pair") {
    op.kind = RescaleOp::Kind::LayerPair;
    op.layer2 = j.value("layer2", 0);
  } else {
    fail(ErrorCategory::Format, "unknown rescale kind '" + kind + "'");
  }
  op.layer = j.value("layer", 0);
  op.alpha = j.value("alpha", 1.0);
  return op;
}

json rescale_op_to_json(const RescaleOp& op) {
  json j;
  j["kind"] = op.kind == RescaleOp::Kind::RowCol ? "row_col" : "layer_pair";
  j["layer"] = op.layer;
  if (op.kind == RescaleOp::Kind::RowCol)
    j["index"] = op.index;
  else
    j["layer2"] = op.layer2;
  j["alpha"] = op.alpha;
  return j;
}

DemoConfig demo_config_from_json(const json& j) {
  DemoConfig cfg;
  require(j.contains("net"), ErrorCategory::Format, "demo config lacks 'net'");
  cfg.net = network_from_json(j["net"]);
  cfg.params = ParamStore::zeros(cfg.net);

  require(j.contains("weights") && j["weights"].is_array(), ErrorCategory::Format,
          "demo config lacks 'weights'");
  const std::vector<int> weight_arrays = cfg.params.weight_array_indices();
  require(j["weights"].size() == weight_arrays.size(), ErrorCategory::Format,
          "demo config has " + std::to_string(j["weights"].size()) + " weight matrices, net has " +
              std::to_string(weight_arrays.size()));
  for (std::size_t k = 0; k < weight_arrays.size(); ++k) {
    const int idx = weight_arrays[k];
    const auto& info = cfg.params.array(idx);
    const json& wj = j["weights"][k];
    require(wj.is_array() && static_cast<int>(wj.size()) == info.rows, ErrorCategory::Format,
            "weight matrix " + std::to_string(k) + " must have " + std::to_string(info.rows) +
                " rows");
    auto w = cfg.params.matrix(idx);
    for (int r = 0; r < info.rows; ++r) {
      const json& rowj = wj[static_cast<std::size_t>(r)];
      require(rowj.is_array() && static_cast<int>(rowj.size()) == info.cols, ErrorCategory::Format,
              "weight matrix " + std::to_string(k) + " row " + std::to_string(r) + " must have " +
                  std::to_string(info.cols) + " entries");
      for (int c = 0; c < info.cols; ++c) w(r, c) = rowj[static_cast<std::size_t>(c)].get<double>();
    }
  }
  if (j.contains("biases")) {
    const json& bj = j["biases"];
    require(bj.is_array() && bj.size() == weight_arrays.size(), ErrorCategory::Format,
            "'biases' must have one entry per weight array (null for none)");
    for (std::size_t k = 0; k < weight_arrays.size(); ++k) {
      if (bj[k].is_null()) continue;
      const int partner = cfg.params.array(weight_arrays[k]).partner;
      require(partner >= 0, ErrorCategory::Format,
              "bias given for a layer without bias parameters");
      auto b = cfg.params.vector(partner);
      require(static_cast<Eigen::Index>(bj[k].size()) == b.size(), ErrorCategory::Format,
              "bias " + std::to_string(k) + " has wrong length");
      for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = bj[k][static_cast<std::size_t>(i)].get<double>();
    }
  }

  require(j.contains("ops") && j["ops"].is_array(), ErrorCategory::Format,
          "demo config lacks 'ops'");
  for (const auto& oj : j["ops"]) cfg.ops.push_back(rescale_op_from_json(oj));

  cfg.probe_count = j.value("probe_count", cfg.probe_count);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.lambda = j.value("lambda", cfg.lambda);
  cfg.measure_metrics = j.value("measure_metrics", cfg.measure_metrics);
  cfg.loss = loss_from_string(j.value("loss", std::string("nsce")));
  cfg.oracle_step = j.value("oracle_step", cfg.oracle_step);
  require(cfg.probe_count >= 1, ErrorCategory::Argument, "probe_count must be >= 1");
  return cfg;
}

namespace {

json norms_json(const ParamStore& params) {
  json out = json::array();
  for (int idx : params.weight_array_indices()) {
    const double sq = params.vector(idx).squaredNorm();
    out.push_back({{"path", params.array(idx).path},
                   {"frobenius", std::sqrt(sq)},
                   {"frobenius_sq", sq}});
  }
  return out;
}

json weights_json(const ParamStore& params) {
  json out = json::array();
  for (int idx : params.weight_array_indices()) {
    ConstMatView w = params.matrix(idx);
    json m = json::array();
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      json row = json::array();
      for (Eigen::Index c = 0; c < w.cols(); ++c) row.push_back(w(r, c));
      m.push_back(std::move(row));
    }
    out.push_back(std::move(m));
  }
  return out;
}

json metrics_json(const DemoConfig& cfg, const ParamStore& params, const RowMat& probes,
                  const std::vector<int>& labels) {
  const HessianDiag h = clipped_copy(
      exact_diag_oracle(cfg.net, params, probes, labels, cfg.loss, cfg.oracle_step));
  const ParamGroups groups = param_groups(cfg.net);
  const auto mn = matrix_normalized_sharpness(params, h, cfg.lambda);
  const auto norm = normalized_sharpness(params, h, groups, cfg.lambda);
  return json{{"trace_sharpness", trace_sharpness(h)},
              {"frobenius_sq_sum", frobenius_sq_sum(params)},
              {"matrix_normalized", mn.value},
              {"normalized", norm.value}};
}

}  // namespace

json run_rescale_demo(const DemoConfig& cfg) {
  const Eigen::Index in_dim = shape_numel(cfg.net.input_shape);
  RowMat probes(cfg.probe_count, in_dim);
  Rng rng(mix_seed(cfg.seed, 0x64656d6fULL));
  for (Eigen::Index r = 0; r < probes.rows(); ++r)
    for (Eigen::Index c = 0; c < in_dim; ++c) probes(r, c) = rng.normal();

  const RowMat before_out = forward_batch(cfg.net, cfg.params, probes);
  std::vector<int> labels(static_cast<std::size_t>(cfg.probe_count));
  for (Eigen::Index r = 0; r < before_out.rows(); ++r)
    labels[static_cast<std::size_t>(r)] = argmax_lowest_tie(before_out.row(r).transpose());

  json out;
  out["probe_count"] = cfg.probe_count;
  out["before"] = {{"norms", norms_json(cfg.params)}, {"weights", weights_json(cfg.params)}};
  if (cfg.measure_metrics)
    out["before"]["metrics"] = metrics_json(cfg, cfg.params, probes, labels);

  ParamStore current = cfg.params;
  out["steps"] = json::array();
  for (const auto& op : cfg.ops) {
    current = apply_rescale(cfg.net, current, op);
    const RowMat step_out = forward_batch(cfg.net, current, probes);
    const double diff = (step_out - before_out).cwiseAbs().maxCoeff();
    out["steps"].push_back({{"op", rescale_op_to_json(op)},
                            {"norms", norms_json(current)},
                            {"weights", weights_json(current)},
                            {"forward_max_abs_diff", diff}});
  }

  const RowMat after_out = forward_batch(cfg.net, current, probes);
  out["after"] = {{"norms", norms_json(current)},
                  {"weights", weights_json(current)},
                  {"forward_max_abs_diff", (after_out - before_out).cwiseAbs().maxCoeff()}};
  if (cfg.measure_metrics) out["after"]["metrics"] = metrics_json(cfg, current, probes, labels);
  return out;
}

}  // namespace sharpnorm

#include "sharpnorm/json_codec.hpp"

#include <fstream>

#include "sharpnorm/error.hpp"

namespace sharpnorm {

using nlohmann::json;

namespace {

const json& field(const json& j, const char* key) {
  auto it = j.find(key);
  require(it != j.end(), ErrorCategory::Format, std::string("missing field '") + key + "'");
  return *it;
}

template <typename T>
T field_as(const json& j, const char* key) {
  try {
    return field(j, key).get<T>();
  } catch (const json::exception& e) {
    fail(ErrorCategory::Format, std::string("field '") + key + "': " + e.what());
  }
}

template <typename T>
T field_or(const json& j, const char* key, T fallback) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return fallback;
  try {
    return it->get<T>();
  } catch (const json::exception& e) {
    fail(ErrorCategory::Format, std::string("field '") + key + "': " + e.what());
  }
}

}  // namespace

json layer_to_json(const LayerSpec& layer) {
  json j;
  if (const auto* d = std::get_if<DenseSpec>(&layer.kind)) {
    j["type"] = "dense";
    j["in"] = d->in;
    j["out"] = d->out;
    j["bias"] = d->has_bias;
  } else if (std::holds_alternative<ReluSpec>(layer.kind)) {
    j["type"] = "relu";
  } else if (const auto* c = std::get_if<Conv2dSpec>(&layer.kind)) {
    j["type"] = "conv2d";
    j["in_ch"] = c->in_ch;
    j["out_ch"] = c->out_ch;
    j["kernel"] = c->kernel;
    j["stride"] = c->stride;
    j["padding"] = c->padding;
    j["bias"] = c->has_bias;
  } else if (std::holds_alternative<FlattenSpec>(layer.kind)) {
    j["type"] = "flatten";
  } else {
    const auto& p = std::get<ParallelSumSpec>(layer.kind);
    j["type"] = "parallel_sum";
    j["a"] = json::array();
    j["b"] = json::array();
    for (const auto& l : p.branch_a) j["a"].push_back(layer_to_json(l));
    for (const auto& l : p.branch_b) j["b"].push_back(layer_to_json(l));
  }
  return j;
}

LayerSpec layer_from_json(const json& j) {
  const auto type = field_as<std::string>(j, "type");
  if (type == "dense")
    return dense(field_as<int>(j, "in"), field_as<int>(j, "out"), field_or<bool>(j, "bias", true));
  if (type == "relu") return relu();
  if (type == "conv2d")
    return conv2d(field_as<int>(j, "in_ch"), field_as<int>(j, "out_ch"),
                  field_as<int>(j, "kernel"), field_or<int>(j, "stride", 1),
                  field_or<int>(j, "padding", 0), field_or<bool>(j, "bias", true));
  if (type == "flatten") return flatten();
  if (type == "parallel_sum") {
    std::vector<LayerSpec> a, b;
    for (const auto& l : field(j, "a")) a.push_back(layer_from_json(l));
    for (const auto& l : field(j, "b")) b.push_back(layer_from_json(l));
    return parallel_sum(std::move(a), std::move(b));
  }
  fail(ErrorCategory::Format, "unknown layer type '" + type + "'");
}

json network_to_json(const NetworkSpec& net) {
  json j;
  j["input_shape"] = net.input_shape;
  j["num_classes"] = net.num_classes;
  j["layers"] = json::array();
  for (const auto& l : net.layers) j["layers"].push_back(layer_to_json(l));
  return j;
}

NetworkSpec network_from_json(const json& j) {
  std::vector<LayerSpec> layers;
  for (const auto& l : field(j, "layers")) layers.push_back(layer_from_json(l));
  return NetworkSpec(std::move(layers), field_as<Shape>(j, "input_shape"),
                     field_as<int>(j, "num_classes"));
}

json train_config_to_json(const TrainConfig& cfg) {
  json j;
  if (const auto* adam = std::get_if<AdamParams>(&cfg.optimizer)) {
    j["optimizer"] = {{"type", "adam"},
                      {"lr", adam->lr},
                      {"beta1", adam->beta1},
                      {"beta2", adam->beta2},
                      {"eps", adam->eps}};
  } else {
    j["optimizer"] = {{"type", "sgd"}, {"lr", std::get<SgdParams>(cfg.optimizer).lr}};
  }
  j["epochs"] = cfg.epochs;
  j["batch_size"] = cfg.batch_size;
  j["seed"] = cfg.seed;
  j["loss"] = to_string(cfg.loss);
  return j;
}

TrainConfig train_config_from_json(const json& j) {
  TrainConfig cfg;
  if (j.contains("optimizer")) {
    const json& o = j["optimizer"];
    const auto type = field_or<std::string>(o, "type", "adam");
    if (type == "adam") {
      AdamParams a;
      a.lr = field_or<double>(o, "lr", a.lr);
      a.beta1 = field_or<double>(o, "beta1", a.beta1);
      a.beta2 = field_or<double>(o, "beta2", a.beta2);
      a.eps = field_or<double>(o, "eps", a.eps);
      cfg.optimizer = a;
    } else if (type == "sgd") {
      cfg.optimizer = SgdParams{field_or<double>(o, "lr", 0.01)};
    } else {
      fail(ErrorCategory::Format, "unknown optimizer '" + type + "'");
    }
  }
  cfg.epochs = field_or<int>(j, "epochs", cfg.epochs);
  cfg.batch_size = field_or<int>(j, "batch_size", cfg.batch_size);
  cfg.seed = field_or<std::uint64_t>(j, "seed", cfg.seed);
  cfg.loss = loss_from_string(field_or<std::string>(j, "loss", "ce"));
  return cfg;
}

json probe_config_to_json(const ProbeConfig& cfg) {
  return json{{"num_probes", cfg.num_probes},
              {"step_coefficient", cfg.step_coefficient},
              {"step_floor", cfg.step_floor},
              {"distribution", to_string(cfg.distribution)},
              {"seed", cfg.seed}};
}

ProbeConfig probe_config_from_json(const json& j) {
  ProbeConfig cfg;
  cfg.num_probes = field_or<int>(j, "num_probes", cfg.num_probes);
  cfg.step_coefficient = field_or<double>(j, "step_coefficient", cfg.step_coefficient);
  cfg.step_floor = field_or<double>(j, "step_floor", cfg.step_floor);
  cfg.distribution =
      probe_distribution_from_string(field_or<std::string>(j, "distribution", "gaussian"));
  cfg.seed = field_or<std::uint64_t>(j, "seed", cfg.seed);
  return cfg;
}

json corruption_to_json(const CorruptionInfo& c) {
  return json{{"ratio", c.ratio}, {"seed", c.seed}};
}

CorruptionInfo corruption_from_json(const json& j) {
  return CorruptionInfo{field_as<double>(j, "ratio"), field_as<std::uint64_t>(j, "seed")};
}

namespace {

json diagnostics_to_json(const SolveDiagnostics& d) {
  json j;
  j["iterations"] = d.iterations;
  j["converged"] = d.converged;
  j["clamp_hits"] = d.clamp_hits;
  if (!d.objective_trace.empty()) {
    j["objective_first"] = d.objective_trace.front();
    j["objective_last"] = d.objective_trace.back();
  }
  return j;
}

json finite_or_marker(double v) {
  if (std::isinf(v)) return "+inf";
  return v;
}

}  // namespace

json report_to_json(const SharpnessReport& rep) {
  json j;
  j["trace_sharpness"] = rep.trace_sharpness;
  j["frobenius_sq_sum"] = rep.frobenius_sq_sum;
  j["matrix_normalized"] = rep.matrix_normalized;
  j["normalized"] = rep.normalized;
  j["lambda"] = rep.lambda;
  j["loss"] = to_string(rep.loss);
  j["curvature"] = rep.exact_curvature ? "exact_diag" : "hutchinson";
  j["probe_config"] = probe_config_to_json(rep.probes);
  j["probes_used"] = rep.probes_used;
  j["fisher_rao"] = rep.fisher_rao ? json(*rep.fisher_rao) : json(nullptr);
  if (rep.noise_based) {
    j["noise_based"] = *rep.noise_based;
    // Caveats that travel with the number: the objective is non-convex and,
    // unlike the normalized metric, has no lambda-rescaling identity.
    j["noise_based_flags"] = {{"non_convex", true}, {"lambda_sensitive", true}};
  } else {
    j["noise_based"] = nullptr;
  }
  j["per_array"] = json::array();
  for (const auto& row : rep.per_array) {
    json r;
    r["path"] = row.path;
    r["kind"] = row.is_bias ? "bias" : "weights";
    r["trace"] = row.trace;
    r["frobenius_sq"] = row.frobenius_sq;
    r["matrix_normalized"] = row.matrix_normalized;
    r["normalized"] = row.normalized;
    if (!row.is_bias) {
      r["optimal_sigma_sq"] = finite_or_marker(row.optimal_sigma_sq);
      r["solver"] = diagnostics_to_json(row.diagnostics);
    }
    j["per_array"].push_back(std::move(r));
  }
  return j;
}

json load_json_file(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCategory::Io, "cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorCategory::Format, path + ": " + e.what());
  }
}

void save_json_file(const std::string& path, const json& j) {
  std::ofstream out(path);
  require(out.good(), ErrorCategory::Io, "cannot open " + path + " for writing");
  out << j.dump(2) << "\n";
  require(out.good(), ErrorCategory::Io, "write failed for " + path);
}

}  // namespace sharpnorm

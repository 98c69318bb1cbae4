#pragma once

#include <variant>

#include "sharpnorm/dataset.hpp"
#include "sharpnorm/net_ops.hpp"

namespace sharpnorm {

struct AdamParams {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct SgdParams {
  double lr = 0.01;
};

struct TrainConfig {
  std::variant<AdamParams, SgdParams> optimizer = AdamParams{};
  int epochs = 50;
  int batch_size = 128;
  std::uint64_t seed = 0;
  LossId loss = LossId::CrossEntropy;
};

struct RunRecord {
  ParamStore params;
  double train_accuracy = -1.0;  // populated by evaluate()
  double test_accuracy = -1.0;
  double gap = 0.0;
  std::vector<double> loss_curve;  // mean training loss per epoch
  TrainConfig config;
  std::optional<CorruptionInfo> corruption;
};

// Seeded per-array uniform initialization in ±sqrt(6/(fan_in+fan_out));
// biases start at zero.
ParamStore init_params(const NetworkSpec& net, std::uint64_t seed);

// Deterministic minibatch training: seeded init, seeded per-epoch shuffle,
// fixed update order. Identical (net, ds, cfg) produce bit-identical params.
RunRecord train(const NetworkSpec& net, const LabeledDataset& ds, const TrainConfig& cfg);

// Fraction of samples whose argmax logit matches the label (ties resolve to
// the lowest class index).
double evaluate(const NetworkSpec& net, const ParamStore& params, const LabeledDataset& ds);

double accuracy_gap(double train_accuracy, double test_accuracy);

}  // namespace sharpnorm

#include "sharpnorm/trainer.hpp"

#include <cmath>

#include "sharpnorm/error.hpp"
#include "sharpnorm/rng.hpp"

namespace sharpnorm {

ParamStore init_params(const NetworkSpec& net, std::uint64_t seed) {
  ParamStore ps = ParamStore::zeros(net);
  for (int idx = 0; idx < ps.num_arrays(); ++idx) {
    const auto& info = ps.array(idx);
    if (info.is_bias()) continue;  // biases stay zero
    double fan_in, fan_out;
    if (info.kind == ParamKind::ConvWeight) {
      fan_in = static_cast<double>(info.in_ch) * info.kernel * info.kernel;
      fan_out = static_cast<double>(info.out_ch) * info.kernel * info.kernel;
    } else {
      fan_in = static_cast<double>(info.cols);
      fan_out = static_cast<double>(info.rows);
    }
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    Rng rng(mix_seed(seed, 0x696e6974ULL + static_cast<std::uint64_t>(idx)));
    auto v = ps.vector(idx);
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = rng.uniform(-limit, limit);
  }
  return ps;
}

namespace {

struct AdamState {
  Eigen::VectorXd m, v;
  std::int64_t t = 0;
};

}  // namespace

RunRecord train(const NetworkSpec& net, const LabeledDataset& ds, const TrainConfig& cfg) {
  ds.validate();
  require(ds.size() > 0, ErrorCategory::Argument, "training dataset is empty");
  require(ds.feature_dim() == shape_numel(net.input_shape), ErrorCategory::Dimension,
          "dataset feature dim " + std::to_string(ds.feature_dim()) +
              " does not match network input " + shape_to_string(net.input_shape));
  require(ds.num_classes <= net.num_classes, ErrorCategory::Dimension,
          "dataset has more classes than network outputs");
  require(cfg.epochs >= 0, ErrorCategory::Argument, "epochs must be >= 0");
  require(cfg.batch_size >= 1, ErrorCategory::Argument, "batch_size must be >= 1");
  if (const auto* adam = std::get_if<AdamParams>(&cfg.optimizer)) {
    require(adam->lr > 0.0, ErrorCategory::Argument, "learning rate must be positive");
    require(adam->beta1 >= 0.0 && adam->beta1 < 1.0 && adam->beta2 >= 0.0 && adam->beta2 < 1.0,
            ErrorCategory::Argument, "adam betas must lie in [0,1)");
    require(adam->eps > 0.0, ErrorCategory::Argument, "adam epsilon must be positive");
  } else {
    require(std::get<SgdParams>(cfg.optimizer).lr > 0.0, ErrorCategory::Argument,
            "learning rate must be positive");
  }
  require(loss_differentiable(cfg.loss), ErrorCategory::UnsupportedLoss,
          std::string("cannot train with loss '") + to_string(cfg.loss) + "'");

  RunRecord rec;
  rec.config = cfg;
  rec.corruption = ds.corruption;
  rec.params = init_params(net, cfg.seed);

  const auto n_params = static_cast<Eigen::Index>(rec.params.total_params());
  AdamState adam_state;
  const auto* adam = std::get_if<AdamParams>(&cfg.optimizer);
  if (adam) {
    adam_state.m = Eigen::VectorXd::Zero(n_params);
    adam_state.v = Eigen::VectorXd::Zero(n_params);
  }

  const int n = ds.size();
  RowMat batch_x;
  std::vector<int> batch_y;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng shuffle_rng(mix_seed(cfg.seed, 0x7368756646ULL + static_cast<std::uint64_t>(epoch)));
    const std::vector<int> order = shuffled_indices(n, shuffle_rng);

    double epoch_loss = 0.0;
    for (int start = 0; start < n; start += cfg.batch_size) {
      const int bsz = std::min(cfg.batch_size, n - start);
      batch_x.resize(bsz, ds.features.cols());
      batch_y.resize(static_cast<std::size_t>(bsz));
      for (int r = 0; r < bsz; ++r) {
        const int src = order[static_cast<std::size_t>(start + r)];
        batch_x.row(r) = ds.features.row(src);
        batch_y[static_cast<std::size_t>(r)] = ds.labels[static_cast<std::size_t>(src)];
      }

      auto [loss, grad] = loss_and_gradient(net, rec.params, batch_x, batch_y, cfg.loss);
      require(std::isfinite(loss), ErrorCategory::Numeric,
              "training diverged to non-finite loss at epoch " + std::to_string(epoch));
      epoch_loss += loss * bsz;

      auto theta = rec.params.flat_vec();
      if (adam) {
        auto& st = adam_state;
        ++st.t;
        st.m = adam->beta1 * st.m + (1.0 - adam->beta1) * grad;
        st.v = adam->beta2 * st.v + (1.0 - adam->beta2) * grad.cwiseAbs2();
        const double bc1 = 1.0 - std::pow(adam->beta1, static_cast<double>(st.t));
        const double bc2 = 1.0 - std::pow(adam->beta2, static_cast<double>(st.t));
        theta -= (adam->lr / bc1) * st.m.cwiseQuotient(
                     ((st.v / bc2).cwiseSqrt().array() + adam->eps).matrix());
      } else {
        theta -= std::get<SgdParams>(cfg.optimizer).lr * grad;
      }
    }
    rec.loss_curve.push_back(epoch_loss / n);
  }
  return rec;
}

double evaluate(const NetworkSpec& net, const ParamStore& params, const LabeledDataset& ds) {
  ds.validate();
  require(ds.size() > 0, ErrorCategory::Argument, "evaluation dataset is empty");
  const RowMat logits = forward_batch(net, params, ds.features);
  int correct = 0;
  for (Eigen::Index b = 0; b < logits.rows(); ++b)
    if (argmax_lowest_tie(logits.row(b).transpose()) == ds.labels[static_cast<std::size_t>(b)])
      ++correct;
  return static_cast<double>(correct) / static_cast<double>(ds.size());
}

double accuracy_gap(double train_accuracy, double test_accuracy) {
  return train_accuracy - test_accuracy;
}

}  // namespace sharpnorm

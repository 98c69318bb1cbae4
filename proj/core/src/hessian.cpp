#include "sharpnorm/hessian.hpp"

#include <cmath>

#include "sharpnorm/error.hpp"
#include "sharpnorm/rng.hpp"

namespace sharpnorm {

const char* to_string(ProbeDistribution d) {
  return d == ProbeDistribution::Gaussian ? "gaussian" : "rademacher";
}

ProbeDistribution probe_distribution_from_string(const std::string& name) {
  if (name == "gaussian") return ProbeDistribution::Gaussian;
  if (name == "rademacher") return ProbeDistribution::Rademacher;
  fail(ErrorCategory::Argument, "unknown probe distribution '" + name + "'");
}

HessianDiag clipped_copy(const HessianDiag& h) {
  HessianDiag out = h;
  out.values = h.values.cwiseMax(0.0);
  out.clipped = true;
  return out;
}

std::vector<ParamBlock> probe_blocks(const ParamStore& params, const ProbeConfig& cfg) {
  std::vector<ParamBlock> blocks;
  blocks.reserve(static_cast<std::size_t>(params.num_arrays()));
  for (int i = 0; i < params.num_arrays(); ++i) {
    const auto& info = params.array(i);
    ParamBlock b;
    b.offset = info.offset;
    b.size = info.size;
    b.radius = cfg.step_coefficient * (params.vector(i).norm() + cfg.step_floor);
    b.name = (info.is_bias() ? "bias@" : "weights@") + info.path;
    blocks.push_back(std::move(b));
  }
  return blocks;
}

namespace {

void check_probe_cfg(const ProbeConfig& cfg) {
  require(cfg.num_probes >= 1, ErrorCategory::Argument, "num_probes must be >= 1");
  require(cfg.step_coefficient > 0.0 && std::isfinite(cfg.step_coefficient),
          ErrorCategory::Argument, "step_coefficient must be positive");
  require(cfg.step_floor > 0.0 && std::isfinite(cfg.step_floor), ErrorCategory::Argument,
          "step_floor must be positive");
}

void check_blocks(const std::vector<ParamBlock>& blocks, std::size_t total) {
  require(!blocks.empty(), ErrorCategory::Argument, "no parameter blocks");
  std::size_t covered = 0;
  for (const auto& b : blocks) {
    require(b.offset == covered, ErrorCategory::Dimension,
            "parameter blocks must tile the flat vector contiguously");
    require(b.radius > 0.0 && std::isfinite(b.radius), ErrorCategory::Numeric,
            "non-finite or zero probe radius for block " + b.name);
    covered += b.size;
  }
  require(covered == total, ErrorCategory::Dimension,
          "parameter blocks cover " + std::to_string(covered) + " of " + std::to_string(total) +
              " parameters");
}

const std::string& block_of(const std::vector<ParamBlock>& blocks, Eigen::Index flat) {
  for (const auto& b : blocks)
    if (static_cast<std::size_t>(flat) >= b.offset &&
        static_cast<std::size_t>(flat) < b.offset + b.size)
      return b.name;
  return blocks.back().name;
}

void check_finite(const Eigen::VectorXd& g, const std::vector<ParamBlock>& blocks,
                  const char* what) {
  for (Eigen::Index i = 0; i < g.size(); ++i)
    if (!std::isfinite(g[i]))
      fail(ErrorCategory::Numeric,
           std::string(what) + " is non-finite in block " + block_of(blocks, i));
}

}  // namespace

HessianDiag hutchinson_diag(const GradFn& grad_fn, const Eigen::Ref<const Eigen::VectorXd>& theta,
                            const std::vector<ParamBlock>& blocks, const ProbeConfig& cfg,
                            bool clip) {
  check_probe_cfg(cfg);
  check_blocks(blocks, static_cast<std::size_t>(theta.size()));

  const Eigen::Index n = theta.size();
  Eigen::VectorXd radius(n);
  for (const auto& b : blocks)
    radius.segment(static_cast<Eigen::Index>(b.offset), static_cast<Eigen::Index>(b.size))
        .setConstant(b.radius);

  Eigen::VectorXd mean = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd m2 = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd eps(n), sample(n);

  for (int p = 0; p < cfg.num_probes; ++p) {
    // Per-probe generator: probes are independent streams, so a parallel
    // evaluation with deterministic reduction would produce identical output.
    Rng rng(mix_seed(cfg.seed, 0x70726f6265ULL + static_cast<std::uint64_t>(p)));
    if (cfg.distribution == ProbeDistribution::Gaussian)
      for (Eigen::Index i = 0; i < n; ++i) eps[i] = rng.normal();
    else
      for (Eigen::Index i = 0; i < n; ++i) eps[i] = rng.rademacher();

    const Eigen::VectorXd delta = radius.cwiseProduct(eps);
    const Eigen::VectorXd gp = grad_fn(theta + delta);
    const Eigen::VectorXd gm = grad_fn(theta - delta);
    require(gp.size() == n && gm.size() == n, ErrorCategory::Dimension,
            "gradient length does not match parameter count");
    check_finite(gp, blocks, "gradient at theta+delta");
    check_finite(gm, blocks, "gradient at theta-delta");

    sample = eps.cwiseProduct(gp - gm).cwiseQuotient(2.0 * radius);
    // Welford update so we can report per-entry standard error of the mean.
    const Eigen::VectorXd d1 = sample - mean;
    mean += d1 / static_cast<double>(p + 1);
    m2 += d1.cwiseProduct(sample - mean);
  }

  HessianDiag out;
  out.values = clip ? mean.cwiseMax(0.0).eval() : mean;
  out.clipped = clip;
  out.probes_used = cfg.num_probes;
  out.step_rule.reserve(blocks.size());
  for (const auto& b : blocks) out.step_rule.push_back(b.radius);
  if (cfg.num_probes >= 2) {
    const double denom = static_cast<double>(cfg.num_probes - 1) * cfg.num_probes;
    out.stderr_of_mean = (m2 / denom).cwiseSqrt();
  } else {
    out.stderr_of_mean = Eigen::VectorXd::Zero(n);
  }
  return out;
}

HessianDiag hutchinson_diag(const NetworkSpec& net, const ParamStore& params,
                            const Eigen::Ref<const RowMat>& X, std::span<const int> labels,
                            LossId loss, const ProbeConfig& cfg) {
  require(X.rows() > 0, ErrorCategory::Argument, "empty batch");
  require(loss_differentiable(loss), ErrorCategory::UnsupportedLoss,
          std::string("loss '") + to_string(loss) + "' has no gradient");

  ParamStore scratch = params;
  GradFn grad_fn = [&](const Eigen::Ref<const Eigen::VectorXd>& theta) {
    scratch.flat_vec() = theta;
    return gradient(net, scratch, X, labels, loss);
  };
  return hutchinson_diag(grad_fn, params.flat_vec(), probe_blocks(params, cfg), cfg, true);
}

HessianDiag exact_diag_oracle(const LossFn& loss_fn, const Eigen::Ref<const Eigen::VectorXd>& theta,
                              double step, std::size_t param_cap) {
  require(step > 0.0 && std::isfinite(step), ErrorCategory::Argument,
          "oracle step must be positive");
  require(static_cast<std::size_t>(theta.size()) <= param_cap, ErrorCategory::Refusal,
          "exact_diag_oracle refused: " + std::to_string(theta.size()) +
              " parameters exceed the cap of " + std::to_string(param_cap));

  const double base = loss_fn(theta);
  require(std::isfinite(base), ErrorCategory::Numeric, "loss at theta is non-finite");

  Eigen::VectorXd values(theta.size());
  Eigen::VectorXd probe = theta;
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    probe[i] = theta[i] + step;
    const double lp = loss_fn(probe);
    probe[i] = theta[i] - step;
    const double lm = loss_fn(probe);
    probe[i] = theta[i];
    require(std::isfinite(lp) && std::isfinite(lm), ErrorCategory::Numeric,
            "loss probe non-finite at parameter " + std::to_string(i));
    values[i] = (lp - 2.0 * base + lm) / (step * step);
  }

  HessianDiag out;
  out.values = std::move(values);
  out.clipped = false;
  out.probes_used = 0;
  out.step_rule = {step};
  return out;
}

HessianDiag exact_diag_oracle(const NetworkSpec& net, const ParamStore& params,
                              const Eigen::Ref<const RowMat>& X, std::span<const int> labels,
                              LossId loss, double step, std::size_t param_cap) {
  require(X.rows() > 0, ErrorCategory::Argument, "empty batch");
  ParamStore scratch = params;
  LossFn loss_fn = [&](const Eigen::Ref<const Eigen::VectorXd>& theta) {
    scratch.flat_vec() = theta;
    return batch_loss(net, scratch, X, labels, loss);
  };
  return exact_diag_oracle(loss_fn, params.flat_vec(), step, param_cap);
}

}  // namespace sharpnorm

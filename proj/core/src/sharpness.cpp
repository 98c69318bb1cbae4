#include "sharpnorm/sharpness.hpp"

#include <cmath>
#include <limits>

#include "sharpnorm/error.hpp"
#include "sharpnorm/rng.hpp"

namespace sharpnorm {

namespace {

void check_alignment(const ParamStore& params, const HessianDiag& h) {
  require(static_cast<std::size_t>(h.values.size()) == params.total_params(),
          ErrorCategory::Dimension,
          "Hessian diagonal length " + std::to_string(h.values.size()) +
              " does not match parameter count " + std::to_string(params.total_params()));
}

void check_lambda(double lambda) {
  require(lambda > 0.0 && std::isfinite(lambda), ErrorCategory::Argument,
          "lambda must be positive and finite");
}

}  // namespace

double trace_sharpness(const HessianDiag& h) {
  require(h.clipped, ErrorCategory::Argument,
          "trace_sharpness expects a clipped Hessian diagonal (use clipped_copy)");
  return h.values.sum();
}

double frobenius_sq_sum(const ParamStore& params) {
  double total = 0.0;
  for (int idx : params.weight_array_indices()) total += params.vector(idx).squaredNorm();
  return total;
}

double kl_diag_gaussian(const ParamStore& params, std::span<const double> sigma_p,
                        std::span<const double> sigma_q) {
  const std::vector<int> weights = params.weight_array_indices();
  require(sigma_p.size() == weights.size() && sigma_q.size() == weights.size(),
          ErrorCategory::Dimension,
          "kl_diag_gaussian needs one sigma per weight array (" + std::to_string(weights.size()) +
              ")");
  double kl = 0.0;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    const double sp = sigma_p[l], sq = sigma_q[l];
    require(sp > 0.0 && sq > 0.0 && std::isfinite(sp) && std::isfinite(sq),
            ErrorCategory::Argument, "sigma values must be positive");
    const double per_param_const = std::log(sp / sq) + (sq * sq) / (2.0 * sp * sp) - 0.5;
    auto add_array = [&](int idx) {
      const auto v = params.vector(idx);
      kl += v.squaredNorm() / (2.0 * sp * sp) +
            per_param_const * static_cast<double>(v.size());
    };
    const int widx = weights[l];
    add_array(widx);
    const int partner = params.array(widx).partner;
    if (partner >= 0) add_array(partner);  // layer sigma broadcasts to its bias
  }
  return kl;
}

MatrixNormalizedResult matrix_normalized_sharpness(const ParamStore& params, const HessianDiag& h,
                                                   double lambda) {
  check_alignment(params, h);
  check_lambda(lambda);
  require(h.clipped, ErrorCategory::Argument,
          "matrix_normalized_sharpness expects a clipped Hessian diagonal");

  MatrixNormalizedResult out;
  for (int idx : params.weight_array_indices()) {
    const auto& info = params.array(idx);
    const double w2 = params.vector(idx).squaredNorm();
    const double hsum = h.values.segment(static_cast<Eigen::Index>(info.offset),
                                         static_cast<Eigen::Index>(info.size))
                            .sum();
    out.per_layer.push_back(std::sqrt(w2 * hsum));
    out.sigma_sq.push_back(hsum > 0.0 ? std::sqrt(w2 / (2.0 * lambda * hsum))
                                      : std::numeric_limits<double>::infinity());
    out.value += out.per_layer.back();
  }
  return out;
}

void build_variance_instance(const ParamStore& params, const HessianDiag& h,
                             const ParamGroups& groups, int array_idx, double lambda, RowMat& a_out,
                             RowMat& b_out) {
  check_alignment(params, h);
  check_lambda(lambda);
  require(array_idx >= 0 && array_idx < params.num_arrays(), ErrorCategory::Argument,
          "array index out of range");
  require(groups.per_array.size() == static_cast<std::size_t>(params.num_arrays()),
          ErrorCategory::Dimension, "groups not aligned with parameter arrays");

  const auto& info = params.array(array_idx);
  const auto& g = groups.per_array[static_cast<std::size_t>(array_idx)];
  require(!g.excluded, ErrorCategory::Argument,
          "array " + info.path + " is excluded from the variance problem");

  a_out = RowMat::Zero(g.row_groups, g.col_groups);
  b_out = RowMat::Zero(g.row_groups, g.col_groups);
  ConstMatView w = params.matrix(array_idx);
  for (int r = 0; r < info.rows; ++r) {
    for (int c = 0; c < info.cols; ++c) {
      const auto flat = static_cast<Eigen::Index>(info.offset + static_cast<std::size_t>(r) * info.cols + c);
      const double hv = h.values[flat];
      require(std::isfinite(hv), ErrorCategory::Numeric,
              "non-finite curvature entry in array " + info.path);
      a_out(g.row_group_of(r, c), g.col_group_of(r, c)) += std::max(hv, 0.0);
      b_out(g.row_group_of(r, c), g.col_group_of(r, c)) += w(r, c) * w(r, c) / (2.0 * lambda);
    }
  }
}

NormalizedResult normalized_sharpness(const ParamStore& params, const HessianDiag& h,
                                      const ParamGroups& groups, double lambda,
                                      const VarianceSolveConfig& solver) {
  check_alignment(params, h);
  check_lambda(lambda);
  require(h.clipped, ErrorCategory::Argument,
          "normalized_sharpness expects a clipped Hessian diagonal");

  NormalizedResult out;
  out.per_array.assign(static_cast<std::size_t>(params.num_arrays()), 0.0);
  out.variances.alpha.resize(static_cast<std::size_t>(params.num_arrays()));
  out.variances.beta.resize(static_cast<std::size_t>(params.num_arrays()));
  out.diagnostics.resize(static_cast<std::size_t>(params.num_arrays()));

  for (int idx = 0; idx < params.num_arrays(); ++idx) {
    const auto& g = groups.per_array[static_cast<std::size_t>(idx)];
    if (g.excluded) continue;  // biases contribute 0
    RowMat a, b;
    build_variance_instance(params, h, groups, idx, lambda, a, b);
    VarianceSolution sol = solve_coordinate_descent(a, b, solver);
    out.per_array[static_cast<std::size_t>(idx)] = sol.value;
    out.variances.alpha[static_cast<std::size_t>(idx)] = std::move(sol.alpha);
    out.variances.beta[static_cast<std::size_t>(idx)] = std::move(sol.beta);
    out.diagnostics[static_cast<std::size_t>(idx)] = std::move(sol.diagnostics);
    out.value += out.per_array[static_cast<std::size_t>(idx)];
  }
  return out;
}

double pac_bayes_bound(double train_loss_q, double kl, std::int64_t m, double delta,
                       double lambda) {
  require(train_loss_q >= 0.0 && train_loss_q <= 1.0, ErrorCategory::Argument,
          "train loss must lie in [0,1]");
  require(kl >= 0.0 && std::isfinite(kl), ErrorCategory::Argument, "kl must be >= 0");
  require(m >= 1, ErrorCategory::Argument, "sample count must be >= 1");
  require(delta > 0.0 && delta <= 1.0, ErrorCategory::Argument, "delta must lie in (0,1]");
  check_lambda(lambda);
  return train_loss_q +
         (kl - std::log(delta) + lambda * lambda / (2.0 * static_cast<double>(m))) / lambda;
}

PacBayesSweepResult pac_bayes_bound_sweep(double train_loss_q, double kl, std::int64_t m,
                                          double delta, std::span<const double> lambda_grid) {
  require(!lambda_grid.empty(), ErrorCategory::Argument, "empty lambda grid");
  const double union_term = std::log(static_cast<double>(lambda_grid.size()));
  PacBayesSweepResult best{std::numeric_limits<double>::infinity(), 0.0};
  for (double lambda : lambda_grid) {
    const double bound =
        pac_bayes_bound(train_loss_q, kl, m, delta, lambda) + union_term / lambda;
    if (bound < best.bound) best = {bound, lambda};
  }
  return best;
}

double fisher_rao_norm(const NetworkSpec& net, const ParamStore& params,
                       const Eigen::Ref<const RowMat>& X, std::span<const int> labels,
                       LossId loss) {
  require(X.rows() > 0, ErrorCategory::Argument, "empty batch");
  require(static_cast<std::size_t>(X.rows()) == labels.size(), ErrorCategory::Dimension,
          "feature/label count mismatch");
  require(loss_differentiable(loss), ErrorCategory::UnsupportedLoss,
          std::string("loss '") + to_string(loss) + "' has no gradient");

  Eigen::VectorXd mean_sq = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(params.total_params()));
  for (Eigen::Index b = 0; b < X.rows(); ++b) {
    const RowMat row = X.row(b);
    const int y = labels[static_cast<std::size_t>(b)];
    const Eigen::VectorXd g = gradient(net, params, row, std::span<const int>(&y, 1), loss);
    mean_sq += g.cwiseAbs2();
  }
  mean_sq /= static_cast<double>(X.rows());
  return params.flat_vec().cwiseAbs2().dot(mean_sq);
}

namespace {

// Index bookkeeping for the stacked (α, β) vectors across arrays.
struct NoiseLayout {
  std::vector<int> alpha_base, beta_base;  // -1 for excluded arrays
  int alpha_total = 0, beta_total = 0;
};

NoiseLayout noise_layout(const std::vector<ParamArrayInfo>& arrays, const ParamGroups& groups) {
  NoiseLayout nl;
  nl.alpha_base.assign(arrays.size(), -1);
  nl.beta_base.assign(arrays.size(), -1);
  for (std::size_t k = 0; k < arrays.size(); ++k) {
    const auto& g = groups.per_array[k];
    if (g.excluded) continue;
    nl.alpha_base[k] = nl.alpha_total;
    nl.beta_base[k] = nl.beta_total;
    nl.alpha_total += g.row_groups;
    nl.beta_total += g.col_groups;
  }
  return nl;
}

}  // namespace

double noise_based_sharpness(const LossFn& loss_fn, const GradFn& grad_fn,
                             const Eigen::Ref<const Eigen::VectorXd>& theta,
                             const std::vector<ParamArrayInfo>& arrays, const ParamGroups& groups,
                             double lambda, int mc_samples, const NoiseSgdConfig& cfg,
                             std::uint64_t seed) {
  check_lambda(lambda);
  require(mc_samples >= 1, ErrorCategory::Argument, "mc_samples must be >= 1");
  require(groups.per_array.size() == arrays.size(), ErrorCategory::Dimension,
          "groups not aligned with parameter arrays");

  const NoiseLayout nl = noise_layout(arrays, groups);
  require(nl.alpha_total > 0, ErrorCategory::Argument, "no weight arrays to perturb");

  Eigen::VectorXd alpha = Eigen::VectorXd::Zero(nl.alpha_total);
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(nl.beta_total);

  const double base_loss = loss_fn(theta);
  require(std::isfinite(base_loss), ErrorCategory::Numeric, "loss at theta is non-finite");

  // Perturbation for one draw: Δ_rc = σ_i σ'_j ε_rc on weight elements.
  auto make_delta = [&](Rng& rng, Eigen::VectorXd& delta) {
    delta.setZero();
    for (std::size_t k = 0; k < arrays.size(); ++k) {
      const auto& g = groups.per_array[k];
      if (g.excluded) continue;
      const auto& info = arrays[k];
      for (int r = 0; r < info.rows; ++r) {
        const double si = std::exp(0.5 * alpha[nl.alpha_base[k] + g.row_group_of(r, 0)]);
        for (int c = 0; c < info.cols; ++c) {
          const double sj = std::exp(0.5 * beta[nl.beta_base[k] + g.col_group_of(r, c)]);
          delta[static_cast<Eigen::Index>(info.offset + static_cast<std::size_t>(r) * info.cols +
                                          c)] = si * sj * rng.normal();
        }
      }
    }
  };

  auto penalty_and_grad = [&](Eigen::VectorXd* galpha, Eigen::VectorXd* gbeta) {
    double pen = 0.0;
    for (std::size_t k = 0; k < arrays.size(); ++k) {
      const auto& g = groups.per_array[k];
      if (g.excluded) continue;
      const auto& info = arrays[k];
      for (int r = 0; r < info.rows; ++r) {
        const int ia = nl.alpha_base[k] + g.row_group_of(r, 0);
        for (int c = 0; c < info.cols; ++c) {
          const int jb = nl.beta_base[k] + g.col_group_of(r, c);
          const double w =
              theta[static_cast<Eigen::Index>(info.offset + static_cast<std::size_t>(r) * info.cols + c)];
          const double term = w * w / (2.0 * lambda) * std::exp(-alpha[ia] - beta[jb]);
          pen += term;
          if (galpha) {
            (*galpha)[ia] -= term;
            (*gbeta)[jb] -= term;
          }
        }
      }
    }
    return pen;
  };

  Eigen::VectorXd delta(theta.size());
  for (int step = 0; step < mc_samples; ++step) {
    Rng rng(mix_seed(seed, 0x6e6f697365ULL + static_cast<std::uint64_t>(step)));
    make_delta(rng, delta);
    const Eigen::VectorXd gp = grad_fn(theta + delta);
    const Eigen::VectorXd gm = grad_fn(theta - delta);
    require(gp.allFinite() && gm.allFinite(), ErrorCategory::Numeric,
            "gradient non-finite during noise SGD");

    Eigen::VectorXd galpha = Eigen::VectorXd::Zero(nl.alpha_total);
    Eigen::VectorXd gbeta = Eigen::VectorXd::Zero(nl.beta_total);
    // d(gap)/dα_i = ½ Σ_{elements in row group i} (g⁺ − g⁻)·Δ  (chain rule
    // through Δ = e^{α/2} e^{β/2} ε).
    for (std::size_t k = 0; k < arrays.size(); ++k) {
      const auto& g = groups.per_array[k];
      if (g.excluded) continue;
      const auto& info = arrays[k];
      for (int r = 0; r < info.rows; ++r) {
        const int ia = nl.alpha_base[k] + g.row_group_of(r, 0);
        for (int c = 0; c < info.cols; ++c) {
          const int jb = nl.beta_base[k] + g.col_group_of(r, c);
          const auto flat = static_cast<Eigen::Index>(info.offset +
                                                      static_cast<std::size_t>(r) * info.cols + c);
          const double contrib = 0.5 * (gp[flat] - gm[flat]) * delta[flat];
          galpha[ia] += contrib;
          gbeta[jb] += contrib;
        }
      }
    }
    penalty_and_grad(&galpha, &gbeta);

    // Mild 1/t decay stabilizes the tail without stalling early progress.
    const double lr = cfg.lr / (1.0 + 3.0 * static_cast<double>(step) / mc_samples);
    alpha -= lr * galpha;
    beta -= lr * gbeta;
    for (Eigen::Index i = 0; i < alpha.size(); ++i)
      alpha[i] = std::clamp(alpha[i], cfg.clamp_min, cfg.clamp_max);
    for (Eigen::Index j = 0; j < beta.size(); ++j)
      beta[j] = std::clamp(beta[j], cfg.clamp_min, cfg.clamp_max);
  }

  // Final objective: fresh antithetic draws at the optimized (α, β).
  double gap = 0.0;
  for (int s = 0; s < cfg.eval_samples; ++s) {
    Rng rng(mix_seed(seed, 0x6576616cULL + static_cast<std::uint64_t>(s)));
    make_delta(rng, delta);
    gap += loss_fn(theta + delta) + loss_fn(theta - delta) - 2.0 * base_loss;
  }
  gap /= static_cast<double>(cfg.eval_samples);
  return gap + penalty_and_grad(nullptr, nullptr);
}

double noise_based_sharpness(const NetworkSpec& net, const ParamStore& params,
                             const Eigen::Ref<const RowMat>& X, std::span<const int> labels,
                             LossId loss, const ParamGroups& groups, double lambda, int mc_samples,
                             const NoiseSgdConfig& cfg, std::uint64_t seed) {
  ParamStore scratch = params;
  LossFn loss_fn = [&](const Eigen::Ref<const Eigen::VectorXd>& theta) {
    scratch.flat_vec() = theta;
    return batch_loss(net, scratch, X, labels, loss);
  };
  GradFn grad_fn = [&](const Eigen::Ref<const Eigen::VectorXd>& theta) {
    scratch.flat_vec() = theta;
    return gradient(net, scratch, X, labels, loss);
  };
  return noise_based_sharpness(loss_fn, grad_fn, params.flat_vec(), params.arrays(), groups,
                               lambda, mc_samples, cfg, seed);
}

SharpnessReport measure_sharpness(const NetworkSpec& net, const ParamStore& params,
                                  const Eigen::Ref<const RowMat>& X, std::span<const int> labels,
                                  const MeasureOptions& opt) {
  check_lambda(opt.lambda);

  HessianDiag h = opt.use_exact_oracle
                      ? clipped_copy(exact_diag_oracle(net, params, X, labels, opt.loss,
                                                       opt.oracle_step))
                      : hutchinson_diag(net, params, X, labels, opt.loss, opt.probes);

  const ParamGroups groups = param_groups(net);
  const MatrixNormalizedResult mn = matrix_normalized_sharpness(params, h, opt.lambda);
  const NormalizedResult norm = normalized_sharpness(params, h, groups, opt.lambda, opt.solver);

  SharpnessReport rep;
  rep.trace_sharpness = trace_sharpness(h);
  rep.frobenius_sq_sum = frobenius_sq_sum(params);
  rep.matrix_normalized = mn.value;
  rep.normalized = norm.value;
  rep.lambda = opt.lambda;
  rep.loss = opt.loss;
  rep.probes = opt.probes;
  rep.exact_curvature = opt.use_exact_oracle;
  rep.probes_used = h.probes_used;

  if (opt.with_fisher_rao) rep.fisher_rao = fisher_rao_norm(net, params, X, labels, opt.loss);
  if (opt.with_noise_based)
    rep.noise_based = noise_based_sharpness(net, params, X, labels, opt.loss, groups, opt.lambda,
                                            opt.noise_mc_samples, opt.noise_cfg, opt.probes.seed);

  const std::vector<int> weights = params.weight_array_indices();
  std::size_t weight_pos = 0;
  for (int idx = 0; idx < params.num_arrays(); ++idx) {
    const auto& info = params.array(idx);
    ArrayBreakdown row;
    row.path = info.path;
    row.is_bias = info.is_bias();
    row.trace = h.values.segment(static_cast<Eigen::Index>(info.offset),
                                 static_cast<Eigen::Index>(info.size))
                    .sum();
    if (!info.is_bias()) {
      row.frobenius_sq = params.vector(idx).squaredNorm();
      row.matrix_normalized = mn.per_layer[weight_pos];
      row.optimal_sigma_sq = mn.sigma_sq[weight_pos];
      row.normalized = norm.per_array[static_cast<std::size_t>(idx)];
      row.diagnostics = norm.diagnostics[static_cast<std::size_t>(idx)];
      ++weight_pos;
    }
    rep.per_array.push_back(std::move(row));
  }
  return rep;
}

}  // namespace sharpnorm

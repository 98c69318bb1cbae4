#pragma once

#include <optional>

#include "sharpnorm/hessian.hpp"
#include "sharpnorm/variance_opt.hpp"

namespace sharpnorm {

// --- simple capacity metrics ---------------------------------------------

// Sum of all (clipped) Hessian-diagonal entries, weights and biases.
double trace_sharpness(const HessianDiag& h);

// Σ over weight arrays of ||W||_F² (biases excluded).
double frobenius_sq_sum(const ParamStore& params);

// Diagonal-Gaussian KL between posterior N(w, σ_Q²) and prior N(0, σ_P²),
// summed per parameter: ln(σ_P/σ_Q) + (w² + σ_Q²)/(2σ_P²) − ½. The σ lists
// hold one standard deviation per weight array, broadcast to that layer's
// weights and bias.
double kl_diag_gaussian(const ParamStore& params, std::span<const double> sigma_p,
                        std::span<const double> sigma_q);

// --- matrix-normalized sharpness ------------------------------------------

struct MatrixNormalizedResult {
  double value = 0.0;
  std::vector<double> per_layer;  // aligned with ParamStore::weight_array_indices()
  std::vector<double> sigma_sq;   // optimal per-layer noise variance; +inf when H == 0
};

// Per weight array l: H_l = Σ h over the array; value = Σ_l sqrt(||W_l||_F²·H_l);
// optimal σ²_l = sqrt(||W_l||_F² / (2λ H_l)).
MatrixNormalizedResult matrix_normalized_sharpness(const ParamStore& params, const HessianDiag& h,
                                                   double lambda);

// --- normalized sharpness --------------------------------------------------

struct VarianceParams {
  // Row/column log-variances per array, aligned with ParamStore::arrays();
  // excluded (bias) arrays hold empty vectors.
  std::vector<Eigen::VectorXd> alpha;
  std::vector<Eigen::VectorXd> beta;
};

struct NormalizedResult {
  double value = 0.0;
  std::vector<double> per_array;  // aligned with ParamStore::arrays(); biases are 0
  VarianceParams variances;
  std::vector<SolveDiagnostics> diagnostics;  // aligned with arrays; trivial for biases
};

// Builds the grouped (a, b) instance for one weight array: a sums the clipped
// curvature over each (row group, column group) cell, b sums W²/(2λ).
void build_variance_instance(const ParamStore& params, const HessianDiag& h,
                             const ParamGroups& groups, int array_idx, double lambda, RowMat& a_out,
                             RowMat& b_out);

// Σ over weight arrays of min_{α,β} Σ_ij [a_ij e^{α_i+β_j} + b_ij e^{−α_i−β_j}];
// biases contribute zero.
NormalizedResult normalized_sharpness(const ParamStore& params, const HessianDiag& h,
                                      const ParamGroups& groups, double lambda,
                                      const VarianceSolveConfig& solver = {});

// --- PAC-Bayes bound assembly ----------------------------------------------

// train_loss_q + (kl − ln δ + λ²/(2m)) / λ for the 0-1 loss concentration term.
double pac_bayes_bound(double train_loss_q, double kl, std::int64_t m, double delta,
                       double lambda);

struct PacBayesSweepResult {
  double bound = 0.0;
  double lambda = 0.0;
};

// Minimizes the bound over the λ grid; a union bound over the grid requires
// δ → δ/|grid|, which is applied here as +ln|grid| inside the numerator.
PacBayesSweepResult pac_bayes_bound_sweep(double train_loss_q, double kl, std::int64_t m,
                                          double delta, std::span<const double> lambda_grid);

// --- baselines ---------------------------------------------------------------

// Σ_i θ_i² · mean over the batch of the squared per-sample gradient.
double fisher_rao_norm(const NetworkSpec& net, const ParamStore& params,
                       const Eigen::Ref<const RowMat>& X, std::span<const int> labels, LossId loss);

struct NoiseSgdConfig {
  double lr = 0.05;
  int eval_samples = 1000;  // fresh draws for the final objective estimate
  double clamp_min = -40.0;
  double clamp_max = 40.0;
};

// Appendix-style noise-based alternative: minimizes, by SGD over row/column
// log-variances, the Monte-Carlo perturbation gap
// L(θ+Δ) + L(θ−Δ) − 2L(θ) with Δ_ij = σ_i σ'_j ε_ij (reparametrized noise on
// weight arrays only) plus the penalty Σ W²/(2λσ²σ'²); returns the final
// objective estimate. Non-convex and λ-sensitive; deterministic given seed.
double noise_based_sharpness(const LossFn& loss_fn, const GradFn& grad_fn,
                             const Eigen::Ref<const Eigen::VectorXd>& theta,
                             const std::vector<ParamArrayInfo>& arrays, const ParamGroups& groups,
                             double lambda, int mc_samples, const NoiseSgdConfig& cfg,
                             std::uint64_t seed);

double noise_based_sharpness(const NetworkSpec& net, const ParamStore& params,
                             const Eigen::Ref<const RowMat>& X, std::span<const int> labels,
                             LossId loss, const ParamGroups& groups, double lambda, int mc_samples,
                             const NoiseSgdConfig& cfg, std::uint64_t seed);

// --- one-shot measurement report ------------------------------------------

struct ArrayBreakdown {
  std::string path;
  bool is_bias = false;
  double trace = 0.0;          // Σ clipped h over this array
  double frobenius_sq = 0.0;   // 0 for bias arrays
  double matrix_normalized = 0.0;
  double optimal_sigma_sq = 0.0;  // +inf marker when the array's curvature sum is 0
  double normalized = 0.0;
  SolveDiagnostics diagnostics;
};

struct MeasureOptions {
  LossId loss = LossId::Nsce;
  double lambda = 0.5;
  ProbeConfig probes{100, 1e-2, 1e-8, ProbeDistribution::Gaussian, 0};
  bool use_exact_oracle = false;  // exact_diag_oracle instead of Hutchinson probing
  double oracle_step = 1e-3;
  bool with_fisher_rao = true;
  bool with_noise_based = false;
  int noise_mc_samples = 2000;
  NoiseSgdConfig noise_cfg;
  VarianceSolveConfig solver;
};

struct SharpnessReport {
  double trace_sharpness = 0.0;
  double frobenius_sq_sum = 0.0;
  double matrix_normalized = 0.0;
  double normalized = 0.0;
  std::optional<double> fisher_rao;
  std::optional<double> noise_based;  // flagged non-convex / λ-sensitive when emitted
  double lambda = 0.5;
  LossId loss = LossId::Nsce;
  ProbeConfig probes;
  bool exact_curvature = false;
  int probes_used = 0;
  std::vector<ArrayBreakdown> per_array;
};

SharpnessReport measure_sharpness(const NetworkSpec& net, const ParamStore& params,
                                  const Eigen::Ref<const RowMat>& X, std::span<const int> labels,
                                  const MeasureOptions& opt);

}  // namespace sharpnorm

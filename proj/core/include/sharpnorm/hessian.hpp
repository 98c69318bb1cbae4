#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "sharpnorm/net_ops.hpp"

namespace sharpnorm {

enum class ProbeDistribution { Gaussian, Rademacher };

const char* to_string(ProbeDistribution d);
ProbeDistribution probe_distribution_from_string(const std::string& name);

struct ProbeConfig {
  int num_probes = 1;
  double step_coefficient = 1e-2;  // rho: probe radius per unit of block norm
  double step_floor = 1e-8;        // tau: protects zero-norm blocks
  ProbeDistribution distribution = ProbeDistribution::Gaussian;
  std::uint64_t seed = 0;
};

// Estimated (or exact) Hessian diagonal of a batch loss, flat-aligned with
// the ParamStore it was computed against.
struct HessianDiag {
  Eigen::VectorXd values;
  bool clipped = false;
  int probes_used = 0;
  std::vector<double> step_rule;       // per-block probe radius (or the oracle step)
  Eigen::VectorXd stderr_of_mean;      // per-entry sampling noise, pre-clip; empty for oracles
};

// Elementwise max(h, 0) with the clipped flag set.
HessianDiag clipped_copy(const HessianDiag& h);

// A contiguous slice of the flat parameter vector sharing one probe radius.
struct ParamBlock {
  std::size_t offset = 0;
  std::size_t size = 0;
  double radius = 0.0;
  std::string name;
};

// One block per parameter array; radius = rho * (||block||_2 + tau), i.e.
// Frobenius norm for weight matrices and Euclidean norm for bias vectors.
std::vector<ParamBlock> probe_blocks(const ParamStore& params, const ProbeConfig& cfg);

using GradFn = std::function<Eigen::VectorXd(const Eigen::Ref<const Eigen::VectorXd>&)>;
using LossFn = std::function<double(const Eigen::Ref<const Eigen::VectorXd>&)>;

// Central-difference Hutchinson estimate of diag(Hessian): averages
// eps ⊙ (g(theta + r·eps) − g(theta − r·eps)) / (2r) over seeded probes,
// where r is per-block. `clip` applies the elementwise max(·,0) of the
// measurement algorithm; pass false to inspect the raw signed estimate.
HessianDiag hutchinson_diag(const GradFn& grad_fn, const Eigen::Ref<const Eigen::VectorXd>& theta,
                            const std::vector<ParamBlock>& blocks, const ProbeConfig& cfg,
                            bool clip = true);

HessianDiag hutchinson_diag(const NetworkSpec& net, const ParamStore& params,
                            const Eigen::Ref<const RowMat>& X, std::span<const int> labels,
                            LossId loss, const ProbeConfig& cfg);

inline constexpr std::size_t kExactDiagParamCap = 5000;

// Per-parameter central second difference (L(θ+he_i) − 2L(θ) + L(θ−he_i))/h²,
// unclipped; refuses above the parameter cap (cost is 2 loss evals/param).
HessianDiag exact_diag_oracle(const LossFn& loss_fn, const Eigen::Ref<const Eigen::VectorXd>& theta,
                              double step, std::size_t param_cap = kExactDiagParamCap);

HessianDiag exact_diag_oracle(const NetworkSpec& net, const ParamStore& params,
                              const Eigen::Ref<const RowMat>& X, std::span<const int> labels,
                              LossId loss, double step, std::size_t param_cap = kExactDiagParamCap);

}  // namespace sharpnorm

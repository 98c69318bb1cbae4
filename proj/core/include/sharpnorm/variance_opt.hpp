#pragma once

#include <Eigen/Core>
#include <vector>

#include "sharpnorm/param_store.hpp"

namespace sharpnorm {

// Inner problem of the normalized-sharpness metric: given nonnegative
// matrices a (grouped curvature) and b (grouped squared weights / 2λ) of the
// same shape, minimize over row log-variances α and column log-variances β
//
//   S(α, β) = Σ_ij [ a_ij e^{α_i + β_j} + b_ij e^{−α_i − β_j} ].
//
// The objective is convex in (α, β); the minimum value is unique although the
// minimizer has a gauge freedom (α + c, β − c).

struct VarianceSolveConfig {
  double clamp_min = -40.0;
  double clamp_max = 40.0;
  double rel_tol = 1e-10;  // stop when the objective's relative change drops below this
  int max_sweeps = 10000;
};

struct SolveDiagnostics {
  std::vector<double> objective_trace;  // objective after each sweep (non-increasing)
  int iterations = 0;
  bool converged = false;
  int clamp_hits = 0;  // variables sitting on the clamp boundary at termination
};

struct VarianceSolution {
  Eigen::VectorXd alpha;  // log row variances, e^{α_i} = σ_i²
  Eigen::VectorXd beta;   // log column variances, e^{β_j} = σ_j'²
  double value = 0.0;
  SolveDiagnostics diagnostics;
};

double variance_objective(const Eigen::Ref<const RowMat>& a, const Eigen::Ref<const RowMat>& b,
                          const Eigen::Ref<const Eigen::VectorXd>& alpha,
                          const Eigen::Ref<const Eigen::VectorXd>& beta);

// Block coordinate descent with exact closed-form updates
// e^{α_i} ← sqrt(B_i / A_i), A_i = Σ_j a_ij e^{β_j}, B_i = Σ_j b_ij e^{−β_j}
// (and symmetrically for β), clamped to the box. Each sweep cannot increase
// the objective.
VarianceSolution solve_coordinate_descent(const Eigen::Ref<const RowMat>& a,
                                          const Eigen::Ref<const RowMat>& b,
                                          const VarianceSolveConfig& cfg = {});

struct GradientDescentConfig {
  double clamp_min = -40.0;
  double clamp_max = 40.0;
  double rel_tol = 1e-14;
  int max_iters = 100000;
  double init_step = 1.0;
};

// Projected gradient descent with Armijo backtracking on the same objective;
// slower, used to cross-check the coordinate-descent solver.
VarianceSolution solve_gradient_descent(const Eigen::Ref<const RowMat>& a,
                                        const Eigen::Ref<const RowMat>& b,
                                        const GradientDescentConfig& cfg = {});

}  // namespace sharpnorm

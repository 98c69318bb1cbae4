#include "sharpnorm/variance_opt.hpp"

#include <cmath>

#include "sharpnorm/error.hpp"

namespace sharpnorm {

namespace {

void check_instance(const Eigen::Ref<const RowMat>& a, const Eigen::Ref<const RowMat>& b) {
  require(a.rows() > 0 && a.cols() > 0, ErrorCategory::Argument, "empty variance instance");
  require(a.rows() == b.rows() && a.cols() == b.cols(), ErrorCategory::Dimension,
          "a and b must have identical shapes");
  require(a.allFinite() && b.allFinite(), ErrorCategory::Numeric,
          "variance instance has non-finite entries");
  require((a.array() >= 0.0).all() && (b.array() >= 0.0).all(), ErrorCategory::Argument,
          "variance instance entries must be nonnegative");
}

int count_clamp_hits(const Eigen::VectorXd& alpha, const Eigen::VectorXd& beta, double lo,
                     double hi) {
  int hits = 0;
  for (Eigen::Index i = 0; i < alpha.size(); ++i)
    if (alpha[i] <= lo || alpha[i] >= hi) ++hits;
  for (Eigen::Index j = 0; j < beta.size(); ++j)
    if (beta[j] <= lo || beta[j] >= hi) ++hits;
  return hits;
}

bool relative_stop(double prev, double cur, double tol) {
  const double scale = std::max({std::abs(prev), std::abs(cur), 1e-300});
  return std::abs(prev - cur) <= tol * scale;
}

}  // namespace

double variance_objective(const Eigen::Ref<const RowMat>& a, const Eigen::Ref<const RowMat>& b,
                          const Eigen::Ref<const Eigen::VectorXd>& alpha,
                          const Eigen::Ref<const Eigen::VectorXd>& beta) {
  require(alpha.size() == a.rows() && beta.size() == a.cols(), ErrorCategory::Dimension,
          "alpha/beta lengths do not match the instance shape");
  const Eigen::ArrayXd ea = alpha.array().exp();
  const Eigen::ArrayXd eb = beta.array().exp();
  double s = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      s += a(i, j) * ea[i] * eb[j] + b(i, j) / (ea[i] * eb[j]);
  return s;
}

VarianceSolution solve_coordinate_descent(const Eigen::Ref<const RowMat>& a,
                                          const Eigen::Ref<const RowMat>& b,
                                          const VarianceSolveConfig& cfg) {
  check_instance(a, b);
  require(cfg.clamp_min < cfg.clamp_max, ErrorCategory::Argument, "clamp box is empty");
  require(cfg.rel_tol > 0.0 && cfg.max_sweeps >= 1, ErrorCategory::Argument,
          "invalid solver configuration");

  const Eigen::Index m = a.rows(), n = a.cols();
  VarianceSolution sol;
  sol.alpha = Eigen::VectorXd::Zero(m);
  sol.beta = Eigen::VectorXd::Zero(n);

  double prev = variance_objective(a, b, sol.alpha, sol.beta);
  auto& diag = sol.diagnostics;

  for (int sweep = 0; sweep < cfg.max_sweeps; ++sweep) {
    const Eigen::ArrayXd eb = sol.beta.array().exp();
    const Eigen::ArrayXd ebi = (-sol.beta.array()).exp();
    for (Eigen::Index i = 0; i < m; ++i) {
      // minimize A_i e^{α} + B_i e^{−α} in closed form
      const double A = (a.row(i).transpose().array() * eb).sum();
      const double B = (b.row(i).transpose().array() * ebi).sum();
      double alpha_i;
      if (A > 0.0 && B > 0.0)
        alpha_i = 0.5 * std::log(B / A);
      else if (A > 0.0)
        alpha_i = cfg.clamp_min;  // only the e^{α} term remains: push down
      else if (B > 0.0)
        alpha_i = cfg.clamp_max;  // only the e^{−α} term remains: push up
      else
        alpha_i = sol.alpha[i];  // row contributes nothing; leave unchanged
      sol.alpha[i] = std::clamp(alpha_i, cfg.clamp_min, cfg.clamp_max);
    }

    const Eigen::ArrayXd ea = sol.alpha.array().exp();
    const Eigen::ArrayXd eai = (-sol.alpha.array()).exp();
    for (Eigen::Index j = 0; j < n; ++j) {
      const double A = (a.col(j).array() * ea).sum();
      const double B = (b.col(j).array() * eai).sum();
      double beta_j;
      if (A > 0.0 && B > 0.0)
        beta_j = 0.5 * std::log(B / A);
      else if (A > 0.0)
        beta_j = cfg.clamp_min;
      else if (B > 0.0)
        beta_j = cfg.clamp_max;
      else
        beta_j = sol.beta[j];
      sol.beta[j] = std::clamp(beta_j, cfg.clamp_min, cfg.clamp_max);
    }

    const double cur = variance_objective(a, b, sol.alpha, sol.beta);
    diag.objective_trace.push_back(cur);
    diag.iterations = sweep + 1;
    if (relative_stop(prev, cur, cfg.rel_tol)) {
      diag.converged = true;
      prev = cur;
      break;
    }
    prev = cur;
  }

  sol.value = prev;
  diag.clamp_hits = count_clamp_hits(sol.alpha, sol.beta, cfg.clamp_min, cfg.clamp_max);
  return sol;
}

VarianceSolution solve_gradient_descent(const Eigen::Ref<const RowMat>& a,
                                        const Eigen::Ref<const RowMat>& b,
                                        const GradientDescentConfig& cfg) {
  check_instance(a, b);
  const Eigen::Index m = a.rows(), n = a.cols();

  VarianceSolution sol;
  sol.alpha = Eigen::VectorXd::Zero(m);
  sol.beta = Eigen::VectorXd::Zero(n);
  auto& diag = sol.diagnostics;

  auto project = [&](Eigen::VectorXd& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i)
      v[i] = std::clamp(v[i], cfg.clamp_min, cfg.clamp_max);
  };

  double cur = variance_objective(a, b, sol.alpha, sol.beta);
  double step = cfg.init_step;

  for (int it = 0; it < cfg.max_iters; ++it) {
    const Eigen::ArrayXd ea = sol.alpha.array().exp();
    const Eigen::ArrayXd eb = sol.beta.array().exp();
    Eigen::VectorXd galpha = Eigen::VectorXd::Zero(m);
    Eigen::VectorXd gbeta = Eigen::VectorXd::Zero(n);
    for (Eigen::Index i = 0; i < m; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        const double up = a(i, j) * ea[i] * eb[j];
        const double down = b(i, j) / (ea[i] * eb[j]);
        galpha[i] += up - down;  // ∂S/∂α_i = A_i e^{α_i} − B_i e^{−α_i}, expanded per term
        gbeta[j] += up - down;
      }
    }

    // Armijo backtracking on the projected step.
    const double gnorm2 = galpha.squaredNorm() + gbeta.squaredNorm();
    if (gnorm2 == 0.0) {
      diag.converged = true;
      diag.iterations = it;
      break;
    }
    double trial_step = step;
    bool accepted = false;
    for (int bt = 0; bt < 60; ++bt) {
      Eigen::VectorXd na = sol.alpha - trial_step * galpha;
      Eigen::VectorXd nb = sol.beta - trial_step * gbeta;
      project(na);
      project(nb);
      const double next = variance_objective(a, b, na, nb);
      if (next <= cur - 1e-4 * trial_step * gnorm2 ||
          (next < cur && relative_stop(cur, next, 1e-16))) {
        sol.alpha = std::move(na);
        sol.beta = std::move(nb);
        const double prev = cur;
        cur = next;
        diag.objective_trace.push_back(cur);
        diag.iterations = it + 1;
        step = trial_step * 1.5;  // mild growth to escape over-conservative steps
        accepted = true;
        if (relative_stop(prev, cur, cfg.rel_tol)) {
          diag.converged = true;
          it = cfg.max_iters;  // exit outer loop
        }
        break;
      }
      trial_step *= 0.5;
    }
    if (!accepted) {
      // No descent direction at floating-point resolution: we are at the optimum.
      diag.converged = true;
      diag.iterations = it + 1;
      break;
    }
  }

  sol.value = cur;
  diag.clamp_hits = count_clamp_hits(sol.alpha, sol.beta, cfg.clamp_min, cfg.clamp_max);
  return sol;
}

}  // namespace sharpnorm

#include "sharpnorm/losses.hpp"

#include <cmath>

#include "sharpnorm/error.hpp"

namespace sharpnorm {

const char* to_string(LossId id) {
  switch (id) {
    case LossId::CrossEntropy: return "ce";
    case LossId::Nsce: return "nsce";
    case LossId::ZeroOne: return "zero_one";
    case LossId::SquaredError: return "squared_error";
  }
  return "unknown";
}

LossId loss_from_string(const std::string& name) {
  if (name == "ce" || name == "cross_entropy") return LossId::CrossEntropy;
  if (name == "nsce") return LossId::Nsce;
  if (name == "zero_one" || name == "01") return LossId::ZeroOne;
  if (name == "squared_error" || name == "se") return LossId::SquaredError;
  fail(ErrorCategory::Argument, "unknown loss id '" + name + "'");
}

bool loss_differentiable(LossId id) { return id != LossId::ZeroOne; }

namespace {

void check_label(const Eigen::Ref<const Eigen::VectorXd>& logits, int label) {
  require(logits.size() > 0, ErrorCategory::Dimension, "loss on empty logit vector");
  require(label >= 0 && label < logits.size(), ErrorCategory::Argument,
          "label " + std::to_string(label) + " out of range for " + std::to_string(logits.size()) +
              " classes");
}

// log(sum_k exp(v_k)) - v_label, computed so that confident correct
// predictions underflow gracefully to tiny positive values instead of 0/inf.
double stable_ce(const Eigen::Ref<const Eigen::VectorXd>& logits, int label) {
  const double vmax = logits.maxCoeff();
  double rest = 0.0;  // sum over exp(v_k - vmax) excluding exactly one max term
  bool max_seen = false;
  for (Eigen::Index k = 0; k < logits.size(); ++k) {
    const double e = logits[k] - vmax;
    if (!max_seen && e == 0.0) {
      max_seen = true;
      continue;
    }
    rest += std::exp(e);
  }
  return (vmax - logits[label]) + std::log1p(rest);
}

}  // namespace

double cross_entropy(const Eigen::Ref<const Eigen::VectorXd>& logits, int label) {
  check_label(logits, label);
  return stable_ce(logits, label);
}

double nsce_loss(const Eigen::Ref<const Eigen::VectorXd>& logits, int label) {
  check_label(logits, label);
  const Eigen::Index k = logits.size();
  const double mu = logits.mean();
  const double var = (logits.array() - mu).square().sum() / static_cast<double>(k);
  const double s = std::max(std::sqrt(var), kNsceStdGuard);
  return stable_ce(logits / s, label);
}

int argmax_lowest_tie(const Eigen::Ref<const Eigen::VectorXd>& v) {
  int best = 0;
  for (Eigen::Index k = 1; k < v.size(); ++k)
    if (v[k] > v[best]) best = static_cast<int>(k);
  return best;
}

double zero_one_loss(const Eigen::Ref<const Eigen::VectorXd>& logits, int label) {
  check_label(logits, label);
  return argmax_lowest_tie(logits) == label ? 0.0 : 1.0;
}

double squared_error(const Eigen::Ref<const Eigen::VectorXd>& logits, int label) {
  check_label(logits, label);
  return (logits.array() - static_cast<double>(label)).square().sum();
}

double loss_value(LossId id, const Eigen::Ref<const Eigen::VectorXd>& logits, int label) {
  switch (id) {
    case LossId::CrossEntropy: return cross_entropy(logits, label);
    case LossId::Nsce: return nsce_loss(logits, label);
    case LossId::ZeroOne: return zero_one_loss(logits, label);
    case LossId::SquaredError: return squared_error(logits, label);
  }
  fail(ErrorCategory::Argument, "invalid loss id");
}

Eigen::VectorXd loss_gradient(LossId id, const Eigen::Ref<const Eigen::VectorXd>& logits,
                              int label) {
  check_label(logits, label);
  require(loss_differentiable(id), ErrorCategory::UnsupportedLoss,
          std::string("loss '") + to_string(id) + "' has no gradient");

  const Eigen::Index k = logits.size();
  Eigen::VectorXd g(k);
  switch (id) {
    case LossId::CrossEntropy: {
      const double vmax = logits.maxCoeff();
      Eigen::VectorXd p = (logits.array() - vmax).exp();
      p /= p.sum();
      g = p;
      g[label] -= 1.0;
      return g;
    }
    case LossId::Nsce: {
      const double mu = logits.mean();
      const double var = (logits.array() - mu).square().sum() / static_cast<double>(k);
      const double s_raw = std::sqrt(var);
      const double s = std::max(s_raw, kNsceStdGuard);
      const Eigen::VectorXd f = logits / s;
      const double vmax = f.maxCoeff();
      Eigen::VectorXd q = (f.array() - vmax).exp();
      q /= q.sum();
      q[label] -= 1.0;  // dCE/df
      if (s_raw < kNsceStdGuard) {
        // Guard active: s is a constant, the map is just logits / guard.
        return q / s;
      }
      const double qf = q.dot(f);
      g = q / s - (qf / (static_cast<double>(k) * s * s)) * (logits.array() - mu).matrix();
      return g;
    }
    case LossId::SquaredError:
      return 2.0 * (logits.array() - static_cast<double>(label)).matrix();
    default: break;
  }
  fail(ErrorCategory::Argument, "invalid loss id");
}

}  // namespace sharpnorm

#pragma once

#include <Eigen/Core>
#include <string>

namespace sharpnorm {

enum class LossId {
  CrossEntropy,  // softmax cross-entropy, log-sum-exp stabilized
  Nsce,          // cross-entropy of logits standardized to zero mean / unit std
  ZeroOne,       // misclassification indicator; not differentiable
  SquaredError,  // sum_k (logit_k - label)^2 with the numeric label broadcast
};

const char* to_string(LossId id);
LossId loss_from_string(const std::string& name);
bool loss_differentiable(LossId id);

// Guard for the logit standard deviation inside NSCE; below this the logits
// are treated as scaled by 1/guard instead (keeps the loss finite
// for constant logit vectors).
inline constexpr double kNsceStdGuard = 1e-12;

double cross_entropy(const Eigen::Ref<const Eigen::VectorXd>& logits, int label);
double nsce_loss(const Eigen::Ref<const Eigen::VectorXd>& logits, int label);
// Returns 0 when argmax(logits) == label, else 1; ties resolve to the lowest
// index.
double zero_one_loss(const Eigen::Ref<const Eigen::VectorXd>& logits, int label);
double squared_error(const Eigen::Ref<const Eigen::VectorXd>& logits, int label);

double loss_value(LossId id, const Eigen::Ref<const Eigen::VectorXd>& logits, int label);

// dLoss/dlogits for one sample; fails with an unsupported-loss error for
// non-differentiable ids.
Eigen::VectorXd loss_gradient(LossId id, const Eigen::Ref<const Eigen::VectorXd>& logits,
                              int label);

int argmax_lowest_tie(const Eigen::Ref<const Eigen::VectorXd>& v);

}  // namespace sharpnorm

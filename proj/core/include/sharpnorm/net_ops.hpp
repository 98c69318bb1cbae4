#pragma once

#include <span>
#include <utility>

#include "sharpnorm/dataset.hpp"
#include "sharpnorm/losses.hpp"
#include "sharpnorm/param_store.hpp"

namespace sharpnorm {

// Batched forward pass; X holds one flattened sample per row and must have
// shape_numel(net.input_shape) columns. Returns B x num_classes logits.
RowMat forward_batch(const NetworkSpec& net, const ParamStore& params,
                     const Eigen::Ref<const RowMat>& X);

// Single-sample convenience wrapper.
Eigen::VectorXd forward(const NetworkSpec& net, const ParamStore& params,
                        const Eigen::Ref<const Eigen::VectorXd>& x);

// Mean loss over the batch.
double batch_loss(const NetworkSpec& net, const ParamStore& params,
                  const Eigen::Ref<const RowMat>& X, std::span<const int> labels, LossId loss);

// Flat gradient of the mean batch loss with respect to every parameter,
// aligned with ParamStore's flat layout.
Eigen::VectorXd gradient(const NetworkSpec& net, const ParamStore& params,
                         const Eigen::Ref<const RowMat>& X, std::span<const int> labels,
                         LossId loss);

std::pair<double, Eigen::VectorXd> loss_and_gradient(const NetworkSpec& net,
                                                     const ParamStore& params,
                                                     const Eigen::Ref<const RowMat>& X,
                                                     std::span<const int> labels, LossId loss);

// Per-sample gradients stacked as rows (B x total_params); used by the
// Fisher-Rao norm. Memory scales with B * total_params.
RowMat per_sample_gradients(const NetworkSpec& net, const ParamStore& params,
                            const Eigen::Ref<const RowMat>& X, std::span<const int> labels,
                            LossId loss);

double dataset_loss(const NetworkSpec& net, const ParamStore& params, const LabeledDataset& ds,
                    LossId loss);
Eigen::VectorXd dataset_gradient(const NetworkSpec& net, const ParamStore& params,
                                 const LabeledDataset& ds, LossId loss);

}  // namespace sharpnorm

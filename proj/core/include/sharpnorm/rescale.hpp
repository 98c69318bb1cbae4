#pragma once

#include "sharpnorm/param_store.hpp"

namespace sharpnorm {

// Function-preserving parameter rescalings exploiting ReLU positive
// homogeneity. Both operate on top-level Dense layers separated only by ReLU
// and refuse to cross parallel_sum boundaries.

struct RescaleOp {
  enum class Kind { LayerPair, RowCol };
  Kind kind = Kind::RowCol;
  int layer = 0;   // l1 for LayerPair, l for RowCol
  int layer2 = 0;  // l2 for LayerPair only
  int index = 0;   // row index for RowCol only
  double alpha = 1.0;
};

// W^(l1) ← α·W^(l1), bias^(l1) ← α·bias^(l1), W^(l2) ← W^(l2)/α.
ParamStore layer_rescale(const NetworkSpec& net, const ParamStore& params, int l1, int l2,
                         double alpha);

// Row i of W^(l) and bias_i divided by α; column i of the next Dense weight
// multiplied by α.
ParamStore row_col_rescale(const NetworkSpec& net, const ParamStore& params, int layer, int index,
                           double alpha);

ParamStore apply_rescale(const NetworkSpec& net, const ParamStore& params, const RescaleOp& op);

// The consuming top-level Dense layer reachable from `layer` through ReLU
// layers only; structure error otherwise.
int consuming_dense_layer(const NetworkSpec& net, int layer);

}  // namespace sharpnorm

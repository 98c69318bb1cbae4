#include "sharpnorm/rescale.hpp"

#include <cmath>

#include "sharpnorm/error.hpp"

namespace sharpnorm {

namespace {

void check_alpha(double alpha) {
  require(alpha > 0.0 && std::isfinite(alpha), ErrorCategory::Argument,
          "rescale factor must be positive and finite");
}

const DenseSpec& dense_at(const NetworkSpec& net, int layer) {
  require(layer >= 0 && layer < static_cast<int>(net.layers.size()), ErrorCategory::Argument,
          "layer index " + std::to_string(layer) + " out of range");
  const auto* d = std::get_if<DenseSpec>(&net.layers[static_cast<std::size_t>(layer)].kind);
  require(d != nullptr, ErrorCategory::Structure,
          "layer " + std::to_string(layer) + " is " +
              layer_kind_name(net.layers[static_cast<std::size_t>(layer)]) +
              ", rescaling requires dense");
  return *d;
}

}  // namespace

int consuming_dense_layer(const NetworkSpec& net, int layer) {
  dense_at(net, layer);
  bool saw_relu = false;
  for (int j = layer + 1; j < static_cast<int>(net.layers.size()); ++j) {
    const auto& kind = net.layers[static_cast<std::size_t>(j)].kind;
    if (std::holds_alternative<ReluSpec>(kind)) {
      saw_relu = true;
      continue;
    }
    if (std::holds_alternative<DenseSpec>(kind)) {
      require(saw_relu, ErrorCategory::Structure,
              "layers " + std::to_string(layer) + " and " + std::to_string(j) +
                  " are not separated by a relu");
      return j;
    }
    fail(ErrorCategory::Structure,
         "layer " + std::to_string(j) + " (" +
             layer_kind_name(net.layers[static_cast<std::size_t>(j)]) +
             ") blocks rescaling past layer " + std::to_string(layer));
  }
  fail(ErrorCategory::Structure,
       "no consuming dense layer after layer " + std::to_string(layer));
}

ParamStore layer_rescale(const NetworkSpec& net, const ParamStore& params, int l1, int l2,
                         double alpha) {
  check_alpha(alpha);
  dense_at(net, l1);
  dense_at(net, l2);
  require(consuming_dense_layer(net, l1) == l2, ErrorCategory::Structure,
          "layers " + std::to_string(l1) + " and " + std::to_string(l2) +
              " are not relu-separated dense neighbors");

  ParamStore out = params;
  const int w1 = weight_array_at_layer(out, l1);
  const int w2 = weight_array_at_layer(out, l2);
  out.matrix(w1) *= alpha;
  if (out.array(w1).partner >= 0) out.vector(out.array(w1).partner) *= alpha;
  out.matrix(w2) /= alpha;
  return out;
}

ParamStore row_col_rescale(const NetworkSpec& net, const ParamStore& params, int layer, int index,
                           double alpha) {
  check_alpha(alpha);
  const DenseSpec& d = dense_at(net, layer);
  require(index >= 0 && index < d.out, ErrorCategory::Argument,
          "row " + std::to_string(index) + " out of range for layer " + std::to_string(layer) +
              " with " + std::to_string(d.out) + " rows");
  const int next = consuming_dense_layer(net, layer);

  ParamStore out = params;
  const int w1 = weight_array_at_layer(out, layer);
  const int w2 = weight_array_at_layer(out, next);
  out.matrix(w1).row(index) /= alpha;
  if (out.array(w1).partner >= 0) out.vector(out.array(w1).partner)[index] /= alpha;
  out.matrix(w2).col(index) *= alpha;
  return out;
}

ParamStore apply_rescale(const NetworkSpec& net, const ParamStore& params, const RescaleOp& op) {
  if (op.kind == RescaleOp::Kind::LayerPair)
    return layer_rescale(net, params, op.layer, op.layer2, op.alpha);
  return row_col_rescale(net, params, op.layer, op.index, op.alpha);
}

}  // namespace sharpnorm

#include "sharpnorm/network.hpp"

#include <numeric>
#include <sstream>

#include "sharpnorm/error.hpp"

namespace sharpnorm {

std::int64_t shape_numel(const Shape& s) {
  std::int64_t n = 1;
  for (int d : s) n *= d;
  return s.empty() ? 0 : n;
}

std::string shape_to_string(const Shape& s) {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << ",";
    os << s[i];
  }
  os << ")";
  return os.str();
}

LayerSpec dense(int in, int out, bool has_bias) { return {DenseSpec{in, out, has_bias}}; }
LayerSpec relu() { return {ReluSpec{}}; }
LayerSpec conv2d(int in_ch, int out_ch, int kernel, int stride, int padding, bool has_bias) {
  return {Conv2dSpec{in_ch, out_ch, kernel, stride, padding, has_bias}};
}
LayerSpec flatten() { return {FlattenSpec{}}; }
LayerSpec parallel_sum(std::vector<LayerSpec> branch_a, std::vector<LayerSpec> branch_b) {
  return {ParallelSumSpec{std::move(branch_a), std::move(branch_b)}};
}

const char* layer_kind_name(const LayerSpec& layer) {
  struct Visitor {
    const char* operator()(const DenseSpec&) const { return "dense"; }
    const char* operator()(const ReluSpec&) const { return "relu"; }
    const char* operator()(const Conv2dSpec&) const { return "conv2d"; }
    const char* operator()(const FlattenSpec&) const { return "flatten"; }
    const char* operator()(const ParallelSumSpec&) const { return "parallel_sum"; }
  };
  return std::visit(Visitor{}, layer.kind);
}

Shape layer_output_shape(const LayerSpec& layer, const Shape& input) {
  require(!input.empty(), ErrorCategory::Dimension, "layer input shape is empty");
  for (int d : input)
    require(d > 0, ErrorCategory::Dimension, "layer input shape has non-positive dim");

  if (const auto* d = std::get_if<DenseSpec>(&layer.kind)) {
    require(d->in > 0 && d->out > 0, ErrorCategory::Dimension, "dense layer needs positive in/out");
    require(input.size() == 1 && input[0] == d->in, ErrorCategory::Dimension,
            "dense layer expects flat input of size " + std::to_string(d->in) + ", got " +
                shape_to_string(input));
    return {d->out};
  }
  if (std::holds_alternative<ReluSpec>(layer.kind)) {
    return input;
  }
  if (const auto* c = std::get_if<Conv2dSpec>(&layer.kind)) {
    require(c->in_ch > 0 && c->out_ch > 0 && c->kernel > 0, ErrorCategory::Dimension,
            "conv2d layer needs positive channels and kernel");
    require(c->stride > 0 && c->padding >= 0, ErrorCategory::Dimension,
            "conv2d layer needs stride > 0 and padding >= 0");
    require(input.size() == 3, ErrorCategory::Dimension,
            "conv2d expects (channels,height,width) input, got " + shape_to_string(input));
    require(input[0] == c->in_ch, ErrorCategory::Dimension,
            "conv2d expects " + std::to_string(c->in_ch) + " input channels, got " +
                std::to_string(input[0]));
    const int h = input[1], w = input[2];
    require(h + 2 * c->padding >= c->kernel && w + 2 * c->padding >= c->kernel,
            ErrorCategory::Dimension, "conv2d kernel larger than padded input");
    const int oh = (h + 2 * c->padding - c->kernel) / c->stride + 1;
    const int ow = (w + 2 * c->padding - c->kernel) / c->stride + 1;
    return {c->out_ch, oh, ow};
  }
  if (std::holds_alternative<FlattenSpec>(layer.kind)) {
    return {static_cast<int>(shape_numel(input))};
  }
  const auto& p = std::get<ParallelSumSpec>(layer.kind);
  require(!p.branch_a.empty() && !p.branch_b.empty(), ErrorCategory::Structure,
          "parallel_sum branches must be non-empty");
  const Shape out_a = sequence_output_shape(p.branch_a, input);
  const Shape out_b = sequence_output_shape(p.branch_b, input);
  require(out_a == out_b, ErrorCategory::Dimension,
          "parallel_sum branch outputs differ: " + shape_to_string(out_a) + " vs " +
              shape_to_string(out_b));
  return out_a;
}

Shape sequence_output_shape(const std::vector<LayerSpec>& layers, const Shape& input) {
  Shape s = input;
  for (const auto& layer : layers) s = layer_output_shape(layer, s);
  return s;
}

NetworkSpec::NetworkSpec(std::vector<LayerSpec> layers_, Shape input_shape_, int num_classes_)
    : layers(std::move(layers_)), input_shape(std::move(input_shape_)), num_classes(num_classes_) {
  require(!layers.empty(), ErrorCategory::Structure, "network needs at least one layer");
  require(num_classes >= 1, ErrorCategory::Dimension, "network needs at least 1 output");
  const Shape out = sequence_output_shape(layers, input_shape);
  require(out.size() == 1 && out[0] == num_classes, ErrorCategory::Dimension,
          "network output shape " + shape_to_string(out) + " does not produce " +
              std::to_string(num_classes) + " logits");
}

}  // namespace sharpnorm

#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

namespace sharpnorm {

// Activation tensor shape, e.g. {784} for a flat vector or {1, 28, 28} for
// a channels-first image. Batch dimension is implicit.
using Shape = std::vector<int>;

std::int64_t shape_numel(const Shape& s);
std::string shape_to_string(const Shape& s);

struct LayerSpec;

struct DenseSpec {
  int in = 0;
  int out = 0;
  bool has_bias = true;
};

struct ReluSpec {};

struct Conv2dSpec {
  int in_ch = 0;
  int out_ch = 0;
  int kernel = 0;
  int stride = 1;
  int padding = 0;
  bool has_bias = true;
};

struct FlattenSpec {};

// Two sub-networks applied to the same input; outputs are summed. Both
// branches must map the input shape to the same output shape.
struct ParallelSumSpec {
  std::vector<LayerSpec> branch_a;
  std::vector<LayerSpec> branch_b;
};

struct LayerSpec {
  std::variant<DenseSpec, ReluSpec, Conv2dSpec, FlattenSpec, ParallelSumSpec> kind;
};

LayerSpec dense(int in, int out, bool has_bias = true);
LayerSpec relu();
LayerSpec conv2d(int in_ch, int out_ch, int kernel, int stride = 1, int padding = 0,
                 bool has_bias = true);
LayerSpec flatten();
LayerSpec parallel_sum(std::vector<LayerSpec> branch_a, std::vector<LayerSpec> branch_b);

const char* layer_kind_name(const LayerSpec& layer);

// Shape propagation; throws a dimension error when the layer cannot consume
// the given input shape.
Shape layer_output_shape(const LayerSpec& layer, const Shape& input);
Shape sequence_output_shape(const std::vector<LayerSpec>& layers, const Shape& input);

// A validated feed-forward classifier: construction checks that every layer
// consumes its predecessor's output shape and that the final output is a flat
// vector of num_classes logits.
struct NetworkSpec {
  std::vector<LayerSpec> layers;
  Shape input_shape;
  int num_classes = 0;

  NetworkSpec() = default;
  NetworkSpec(std::vector<LayerSpec> layers_, Shape input_shape_, int num_classes_);
};

}  // namespace sharpnorm

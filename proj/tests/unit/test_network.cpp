#include <doctest.h>

#include "sharpnorm/error.hpp"
#include "sharpnorm/network.hpp"

using namespace sharpnorm;

TEST_CASE("shape helpers") {
  CHECK(shape_numel({784}) == 784);
  CHECK(shape_numel({1, 28, 28}) == 784);
  CHECK(shape_to_string({1, 28, 28}) == "(1,28,28)");
}

TEST_CASE("dense output shape requires a flat input of matching width") {
  CHECK(layer_output_shape(dense(4, 3), {4}) == Shape{3});
  CHECK_THROWS_AS(layer_output_shape(dense(4, 3), {5}), Error);
  CHECK_THROWS_AS(layer_output_shape(dense(4, 3), {2, 2}), Error);
}

TEST_CASE("relu and flatten propagate shapes") {
  CHECK(layer_output_shape(relu(), {7}) == Shape{7});
  CHECK(layer_output_shape(relu(), {3, 5, 5}) == Shape{3, 5, 5});
  CHECK(layer_output_shape(flatten(), {3, 5, 5}) == Shape{75});
}

TEST_CASE("conv2d output shape uses floor((H + 2p - k)/s) + 1") {
  CHECK(layer_output_shape(conv2d(1, 8, 3), {1, 28, 28}) == Shape{8, 26, 26});
  CHECK(layer_output_shape(conv2d(1, 8, 3, 1, 1), {1, 28, 28}) == Shape{8, 28, 28});
  CHECK(layer_output_shape(conv2d(3, 4, 3, 2, 1), {3, 7, 7}) == Shape{4, 4, 4});
  CHECK_THROWS_AS(layer_output_shape(conv2d(2, 4, 3), {1, 28, 28}), Error);  // channel mismatch
  CHECK_THROWS_AS(layer_output_shape(conv2d(1, 4, 9), {1, 5, 5}), Error);    // kernel too large
}

TEST_CASE("parallel_sum branches must agree on the output shape") {
  LayerSpec ok = parallel_sum({dense(4, 3, false)}, {dense(4, 3, false)});
  CHECK(layer_output_shape(ok, {4}) == Shape{3});
  LayerSpec bad = parallel_sum({dense(4, 3, false)}, {dense(4, 2, false)});
  CHECK_THROWS_AS(layer_output_shape(bad, {4}), Error);
}

TEST_CASE("network construction validates the whole chain") {
  CHECK_NOTHROW(NetworkSpec({dense(20, 16), relu(), dense(16, 2)}, {20}, 2));
  // Mismatched hand-off between layers.
  CHECK_THROWS_AS(NetworkSpec({dense(20, 16), relu(), dense(8, 2)}, {20}, 2), Error);
  // Final width must equal num_classes.
  CHECK_THROWS_AS(NetworkSpec({dense(20, 16), relu(), dense(16, 3)}, {20}, 2), Error);
  // Conv stack with flatten.
  CHECK_NOTHROW(NetworkSpec({conv2d(1, 4, 3), relu(), flatten(), dense(4 * 26 * 26, 10)},
                            {1, 28, 28}, 10));
  // Empty networks are rejected.
  CHECK_THROWS_AS(NetworkSpec({}, {4}, 4), Error);
}

TEST_CASE("layer kind names") {
  CHECK(std::string(layer_kind_name(dense(1, 1))) == "dense");
  CHECK(std::string(layer_kind_name(relu())) == "relu");
  CHECK(std::string(layer_kind_name(conv2d(1, 1, 1))) == "conv2d");
  CHECK(std::string(layer_kind_name(flatten())) == "flatten");
  CHECK(std::string(layer_kind_name(parallel_sum({relu()}, {relu()}))) == "parallel_sum");
}

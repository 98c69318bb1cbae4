#pragma once

#include <Eigen/Core>
#include <span>
#include <string>
#include <vector>

#include "sharpnorm/network.hpp"

namespace sharpnorm {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatView = Eigen::Map<RowMat>;
using ConstMatView = Eigen::Map<const RowMat>;
using VecView = Eigen::Map<Eigen::VectorXd>;
using ConstVecView = Eigen::Map<const Eigen::VectorXd>;

enum class ParamKind { DenseWeight, ConvWeight, Bias };

// One parameter array (a weight matrix, conv filter bank, or bias vector)
// inside the flat parameter vector. Every array also has a canonical matrix
// view: dense weights are out x in, conv filters are out_ch x (in_ch*k*k)
// with column index ic*k*k + kr*k + kc, biases are len x 1.
struct ParamArrayInfo {
  ParamKind kind = ParamKind::DenseWeight;
  std::string path;  // top-level layer index, or e.g. "2.a.1" inside a parallel_sum branch
  int rows = 0;
  int cols = 0;
  int out_ch = 0, in_ch = 0, kernel = 0;  // conv only
  std::size_t offset = 0;                 // into the flat vector
  std::size_t size = 0;
  int partner = -1;  // weight <-> bias array of the same layer, -1 if none

  bool is_bias() const { return kind == ParamKind::Bias; }
};

std::vector<ParamArrayInfo> enumerate_param_arrays(const NetworkSpec& net);

// Owns all network parameters as one flat float64 vector plus structured
// per-array matrix views aliasing the same storage.
class ParamStore {
 public:
  ParamStore() = default;
  static ParamStore zeros(const NetworkSpec& net);

  std::size_t total_params() const { return flat_.size(); }
  int num_arrays() const { return static_cast<int>(arrays_.size()); }
  const std::vector<ParamArrayInfo>& arrays() const { return arrays_; }
  const ParamArrayInfo& array(int idx) const;

  std::span<double> flat() { return flat_; }
  std::span<const double> flat() const { return flat_; }
  VecView flat_vec() { return VecView(flat_.data(), static_cast<Eigen::Index>(flat_.size())); }
  ConstVecView flat_vec() const {
    return ConstVecView(flat_.data(), static_cast<Eigen::Index>(flat_.size()));
  }

  MatView matrix(int idx);
  ConstMatView matrix(int idx) const;
  VecView vector(int idx);
  ConstVecView vector(int idx) const;

  // Flat index of matrix-view element (row, col); bounds-checked.
  std::size_t flat_index(int idx, int row, int col) const;
  // Flat index of conv element (out_ch, in_ch, kr, kc); bounds-checked.
  std::size_t conv_flat_index(int idx, int oc, int ic, int kr, int kc) const;

  struct Location {
    int array = -1;
    int row = 0;
    int col = 0;
  };
  Location locate(std::size_t flat_idx) const;

  // Ordinals of the weight (non-bias) arrays in traversal order.
  std::vector<int> weight_array_indices() const;

 private:
  std::vector<double> flat_;
  std::vector<ParamArrayInfo> arrays_;
};

// theta' = theta + scale * direction; direction length must match.
ParamStore perturb(const ParamStore& params, std::span<const double> direction, double scale);

// Weight array ordinal whose path equals the given top-level layer index;
// fails with a structure error if that layer has no weights.
int weight_array_at_layer(const ParamStore& params, int top_level_layer);

// Rescaling groups for the normalized-sharpness variance problem: dense
// weights group by (output row, input column); conv filters group by
// (out_channel, in_channel) so all k*k taps of a channel pair share one group
// pair; biases are excluded (their optimal noise variance is unbounded, they
// contribute zero).
struct ArrayGroups {
  bool excluded = false;
  int row_groups = 0;
  int col_groups = 0;
  int taps = 1;  // matrix-view columns per column group (k*k for conv, 1 for dense)

  int row_group_of(int row, int) const { return row; }
  int col_group_of(int, int col) const { return col / taps; }
  std::int64_t grouped_elements() const {
    return excluded ? 0 : static_cast<std::int64_t>(row_groups) * col_groups * taps;
  }
};

struct ParamGroups {
  std::vector<ArrayGroups> per_array;  // aligned with ParamStore::arrays()
};

ParamGroups param_groups(const NetworkSpec& net);
ParamGroups param_groups(const std::vector<ParamArrayInfo>& arrays);

}  // namespace sharpnorm

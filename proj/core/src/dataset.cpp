#include "sharpnorm/dataset.hpp"

#include <cmath>

#include "sharpnorm/error.hpp"
#include "sharpnorm/rng.hpp"

namespace sharpnorm {

void LabeledDataset::validate() const {
  require(features.rows() == static_cast<Eigen::Index>(labels.size()), ErrorCategory::Dimension,
          "dataset has " + std::to_string(features.rows()) + " feature rows but " +
              std::to_string(labels.size()) + " labels");
  require(num_classes >= 1, ErrorCategory::Dimension, "dataset needs at least 1 class");
  require(shape_numel(input_shape) == features.cols(), ErrorCategory::Dimension,
          "dataset input shape " + shape_to_string(input_shape) + " does not match feature dim " +
              std::to_string(features.cols()));
  for (int y : labels)
    require(y >= 0 && y < num_classes, ErrorCategory::Format,
            "dataset label " + std::to_string(y) + " out of range");
}

LabeledDataset LabeledDataset::subset(std::span<const int> indices) const {
  LabeledDataset out;
  out.features.resize(static_cast<Eigen::Index>(indices.size()), features.cols());
  out.labels.reserve(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const int idx = indices[i];
    require(idx >= 0 && idx < size(), ErrorCategory::Argument,
            "subset index " + std::to_string(idx) + " out of range");
    out.features.row(static_cast<Eigen::Index>(i)) = features.row(idx);
    out.labels.push_back(labels[static_cast<std::size_t>(idx)]);
  }
  out.num_classes = num_classes;
  out.input_shape = input_shape;
  out.corruption = corruption;
  return out;
}

std::vector<int> shuffled_indices(int n, Rng& rng) {
  std::vector<int> idx(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
  for (int i = n - 1; i > 0; --i) {
    const auto j = static_cast<std::size_t>(rng.uniform_int(0, i));
    std::swap(idx[static_cast<std::size_t>(i)], idx[j]);
  }
  return idx;
}

LabeledDataset synth_blobs(int num_classes, int per_class, int dim, double spread,
                           std::uint64_t seed) {
  require(num_classes >= 2, ErrorCategory::Argument, "synth_blobs needs at least 2 classes");
  require(per_class >= 1, ErrorCategory::Argument, "synth_blobs needs per_class >= 1");
  require(dim >= 1, ErrorCategory::Argument, "synth_blobs needs dim >= 1");
  require(spread >= 0.0 && std::isfinite(spread), ErrorCategory::Argument,
          "synth_blobs needs non-negative finite spread");

  Rng rng(mix_seed(seed, 0x62'6c'6f'62ULL));  // "blob"
  RowMat centers(num_classes, dim);
  for (int c = 0; c < num_classes; ++c)
    for (int d = 0; d < dim; ++d) centers(c, d) = rng.uniform(-1.0, 1.0);

  LabeledDataset ds;
  const int n = num_classes * per_class;
  ds.features.resize(n, dim);
  ds.labels.resize(static_cast<std::size_t>(n));
  int row = 0;
  for (int c = 0; c < num_classes; ++c) {
    for (int s = 0; s < per_class; ++s, ++row) {
      for (int d = 0; d < dim; ++d) ds.features(row, d) = centers(c, d) + spread * rng.normal();
      ds.labels[static_cast<std::size_t>(row)] = c;
    }
  }
  ds.num_classes = num_classes;
  ds.input_shape = {dim};
  ds.validate();
  return ds;
}

LabeledDataset corrupt_labels(const LabeledDataset& ds, double ratio, std::uint64_t seed) {
  require(ratio >= 0.0 && ratio <= 1.0, ErrorCategory::Argument,
          "corruption ratio must lie in [0,1]");
  ds.validate();

  LabeledDataset out = ds;
  const int n = ds.size();
  const int m = static_cast<int>(std::lround(ratio * n));

  Rng rng(mix_seed(seed, 0x63'6f'72'72ULL));  // "corr"
  const std::vector<int> order = shuffled_indices(n, rng);
  for (int i = 0; i < m; ++i) {
    const int idx = order[static_cast<std::size_t>(i)];
    out.labels[static_cast<std::size_t>(idx)] =
        static_cast<int>(rng.uniform_int(0, ds.num_classes - 1));
  }
  out.corruption = CorruptionInfo{ratio, seed};
  return out;
}

LabeledDataset shuffled_subset(const LabeledDataset& ds, int count, std::uint64_t seed) {
  require(count >= 0 && count <= ds.size(), ErrorCategory::Argument,
          "subset size " + std::to_string(count) + " out of range for dataset of " +
              std::to_string(ds.size()));
  Rng rng(mix_seed(seed, 0x73'75'62ULL));  // "sub"
  std::vector<int> order = shuffled_indices(ds.size(), rng);
  order.resize(static_cast<std::size_t>(count));
  return ds.subset(order);
}

}  // namespace sharpnorm

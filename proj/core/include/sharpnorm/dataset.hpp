#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "sharpnorm/param_store.hpp"

namespace sharpnorm {

struct CorruptionInfo {
  double ratio = 0.0;
  std::uint64_t seed = 0;
};

// Row-major feature matrix (one flattened sample per row) plus integer
// labels. input_shape describes how a row folds back into a tensor, e.g.
// {1,28,28} for MNIST images.
struct LabeledDataset {
  RowMat features;
  std::vector<int> labels;
  int num_classes = 0;
  Shape input_shape;
  std::optional<CorruptionInfo> corruption;

  int size() const { return static_cast<int>(features.rows()); }
  int feature_dim() const { return static_cast<int>(features.cols()); }

  void validate() const;
  LabeledDataset subset(std::span<const int> indices) const;
};

// Gaussian class blobs: num_classes cluster centers drawn uniformly from
// [-1,1]^dim, per_class samples around each center with isotropic noise of
// the given spread. Deterministic in seed.
LabeledDataset synth_blobs(int num_classes, int per_class, int dim, double spread,
                           std::uint64_t seed);

// Returns a copy with round(ratio * n) distinct rows (chosen without
// replacement) relabeled uniformly at random over all classes, original label
// included. ratio must lie in [0,1].
LabeledDataset corrupt_labels(const LabeledDataset& ds, double ratio, std::uint64_t seed);

// First `count` samples of a seed-deterministic shuffle of ds.
LabeledDataset shuffled_subset(const LabeledDataset& ds, int count, std::uint64_t seed);

// Fisher-Yates permutation of {0..n-1}, deterministic in the generator state.
std::vector<int> shuffled_indices(int n, class Rng& rng);

}  // namespace sharpnorm

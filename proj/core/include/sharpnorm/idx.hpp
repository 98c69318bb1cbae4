#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sharpnorm/dataset.hpp"

namespace sharpnorm {

inline constexpr std::uint32_t kIdxImagesMagic = 2051;  // 0x00000803: u8 data, 3 dims
inline constexpr std::uint32_t kIdxLabelsMagic = 2049;  // 0x00000801: u8 data, 1 dim

// Parse a big-endian IDX image/label file pair into a dataset. Pixels are
// scaled to [0,1] by dividing by 255; num_classes is inferred as
// max(label)+1 (at least 2).
LabeledDataset parse_idx(std::span<const unsigned char> image_bytes,
                         std::span<const unsigned char> label_bytes);

// Read a file; if it starts with the gzip magic, inflate it transparently.
std::vector<unsigned char> read_file_maybe_gzip(const std::string& path);

LabeledDataset load_idx_files(const std::string& images_path, const std::string& labels_path);

// Load the train or test split from a directory using the standard MNIST
// file names (train-images-idx3-ubyte / t10k-images-idx3-ubyte etc.), with or
// without a .gz suffix.
LabeledDataset load_mnist_split(const std::string& dir, bool train);

bool mnist_split_present(const std::string& dir, bool train);

}  // namespace sharpnorm

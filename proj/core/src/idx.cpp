#include "sharpnorm/idx.hpp"

#include <zlib.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "sharpnorm/error.hpp"

namespace sharpnorm {

namespace {

std::uint32_t read_be_u32(std::span<const unsigned char> bytes, std::size_t off,
                          const char* what) {
  require(off + 4 <= bytes.size(), ErrorCategory::Format,
          std::string("idx data truncated while reading ") + what);
  return (static_cast<std::uint32_t>(bytes[off]) << 24) |
         (static_cast<std::uint32_t>(bytes[off + 1]) << 16) |
         (static_cast<std::uint32_t>(bytes[off + 2]) << 8) |
         static_cast<std::uint32_t>(bytes[off + 3]);
}

std::vector<unsigned char> gunzip(std::span<const unsigned char> bytes, const std::string& path) {
  z_stream zs{};
  // 15 window bits | 32 enables automatic gzip/zlib header detection.
  require(inflateInit2(&zs, 15 + 32) == Z_OK, ErrorCategory::Io, "zlib init failed for " + path);

  std::vector<unsigned char> out;
  std::vector<unsigned char> buf(1 << 16);
  zs.next_in = const_cast<unsigned char*>(bytes.data());
  zs.avail_in = static_cast<uInt>(bytes.size());
  int rc = Z_OK;
  while (rc != Z_STREAM_END) {
    zs.next_out = buf.data();
    zs.avail_out = static_cast<uInt>(buf.size());
    rc = inflate(&zs, Z_NO_FLUSH);
    if (rc != Z_OK && rc != Z_STREAM_END) {
      inflateEnd(&zs);
      fail(ErrorCategory::Format, "gzip stream in " + path + " is corrupt");
    }
    out.insert(out.end(), buf.data(), buf.data() + (buf.size() - zs.avail_out));
    if (rc == Z_OK && zs.avail_in == 0 && zs.avail_out != 0) {
      inflateEnd(&zs);
      fail(ErrorCategory::Format, "gzip stream in " + path + " ended unexpectedly");
    }
  }
  inflateEnd(&zs);
  return out;
}

}  // namespace

std::vector<unsigned char> read_file_maybe_gzip(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorCategory::Io, "cannot open " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  require(!in.bad(), ErrorCategory::Io, "read failed for " + path);
  if (bytes.size() >= 2 && bytes[0] == 0x1f && bytes[1] == 0x8b) return gunzip(bytes, path);
  return bytes;
}

LabeledDataset parse_idx(std::span<const unsigned char> image_bytes,
                         std::span<const unsigned char> label_bytes) {
  const std::uint32_t image_magic = read_be_u32(image_bytes, 0, "image magic");
  require(image_magic == kIdxImagesMagic, ErrorCategory::Format,
          "bad idx image magic " + std::to_string(image_magic) + " (expected " +
              std::to_string(kIdxImagesMagic) + ")");
  const std::uint32_t n_images = read_be_u32(image_bytes, 4, "image count");
  const std::uint32_t rows = read_be_u32(image_bytes, 8, "image rows");
  const std::uint32_t cols = read_be_u32(image_bytes, 12, "image cols");
  require(n_images > 0 && rows > 0 && cols > 0, ErrorCategory::Format,
          "idx image header has zero dimension");
  const std::size_t pixels = static_cast<std::size_t>(n_images) * rows * cols;
  require(image_bytes.size() == 16 + pixels, ErrorCategory::Format,
          "idx image payload has " + std::to_string(image_bytes.size() - 16) +
              " bytes, expected " + std::to_string(pixels));

  const std::uint32_t label_magic = read_be_u32(label_bytes, 0, "label magic");
  require(label_magic == kIdxLabelsMagic, ErrorCategory::Format,
          "bad idx label magic " + std::to_string(label_magic) + " (expected " +
              std::to_string(kIdxLabelsMagic) + ")");
  const std::uint32_t n_labels = read_be_u32(label_bytes, 4, "label count");
  require(label_bytes.size() == 8 + n_labels, ErrorCategory::Format,
          "idx label payload has " + std::to_string(label_bytes.size() - 8) +
              " bytes, expected " + std::to_string(n_labels));
  require(n_images == n_labels, ErrorCategory::Format,
          "idx pair mismatch: " + std::to_string(n_images) + " images vs " +
              std::to_string(n_labels) + " labels");

  LabeledDataset ds;
  ds.features.resize(static_cast<Eigen::Index>(n_images),
                     static_cast<Eigen::Index>(rows * cols));
  ds.labels.resize(n_labels);
  const unsigned char* px = image_bytes.data() + 16;
  for (std::size_t i = 0; i < n_images; ++i) {
    double* dst = ds.features.data() + i * rows * cols;
    for (std::size_t j = 0; j < static_cast<std::size_t>(rows) * cols; ++j)
      dst[j] = static_cast<double>(px[i * rows * cols + j]) / 255.0;
  }
  int max_label = 0;
  for (std::size_t i = 0; i < n_labels; ++i) {
    ds.labels[i] = static_cast<int>(label_bytes[8 + i]);
    max_label = std::max(max_label, ds.labels[i]);
  }
  ds.num_classes = std::max(max_label + 1, 2);
  ds.input_shape = {1, static_cast<int>(rows), static_cast<int>(cols)};
  ds.validate();
  return ds;
}

LabeledDataset load_idx_files(const std::string& images_path, const std::string& labels_path) {
  const auto img = read_file_maybe_gzip(images_path);
  const auto lbl = read_file_maybe_gzip(labels_path);
  return parse_idx(img, lbl);
}

namespace {

std::string find_variant(const std::string& dir, const std::string& base) {
  namespace fs = std::filesystem;
  for (const char* suffix : {"", ".gz"}) {
    const fs::path p = fs::path(dir) / (base + suffix);
    if (fs::exists(p)) return p.string();
  }
  return {};
}

}  // namespace

bool mnist_split_present(const std::string& dir, bool train) {
  const std::string stem = train ? "train" : "t10k";
  return !find_variant(dir, stem + "-images-idx3-ubyte").empty() &&
         !find_variant(dir, stem + "-labels-idx1-ubyte").empty();
}

LabeledDataset load_mnist_split(const std::string& dir, bool train) {
  const std::string stem = train ? "train" : "t10k";
  const std::string img = find_variant(dir, stem + "-images-idx3-ubyte");
  const std::string lbl = find_variant(dir, stem + "-labels-idx1-ubyte");
  require(!img.empty() && !lbl.empty(), ErrorCategory::Io,
          "no " + stem + " idx files found under " + dir);
  return load_idx_files(img, lbl);
}

}  // namespace sharpnorm

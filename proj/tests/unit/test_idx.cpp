#include <doctest.h>

#include "sharpnorm/error.hpp"
#include "sharpnorm/idx.hpp"
#include "test_util.hpp"

using namespace sharpnorm;
using testutil::error_category_of;
using testutil::idx_image_bytes;
using testutil::idx_label_bytes;

TEST_CASE("two-image fixture parses to scaled pixels and labels [3,7]") {
  const std::vector<unsigned char> pixels = {0, 0, 0, 0, 255, 255, 255, 255};
  const std::vector<unsigned char> labels = {3, 7};
  const auto img = idx_image_bytes(2, 2, 2, pixels);
  const auto lab = idx_label_bytes(labels);
  const LabeledDataset ds = parse_idx(img, lab);
  CHECK(ds.size() == 2);
  CHECK(ds.feature_dim() == 4);
  CHECK(ds.input_shape == Shape{1, 2, 2});
  CHECK(ds.features.row(0).cwiseAbs().maxCoeff() == 0.0);
  CHECK(ds.features.row(1).minCoeff() == 1.0);
  CHECK(ds.labels == std::vector<int>{3, 7});
  CHECK(ds.num_classes == 8);  // max label + 1
}

TEST_CASE("pixel scaling is value/255 bit-exactly") {
  const std::vector<unsigned char> pixels = {0, 51, 102, 153, 204, 255, 25, 50};
  const auto img = idx_image_bytes(2, 2, 2, pixels);
  const auto lab = idx_label_bytes(std::vector<unsigned char>{0, 1});
  const LabeledDataset ds = parse_idx(img, lab);
  for (int i = 0; i < 8; ++i)
    CHECK(ds.features(i / 4, i % 4) == pixels[static_cast<std::size_t>(i)] / 255.0);
}

TEST_CASE("label magic passed as images is a format error naming 2051") {
  const auto lab = idx_label_bytes(std::vector<unsigned char>{3, 7});
  const auto img = idx_image_bytes(2, 2, 2, std::vector<unsigned char>(8, 0));
  CHECK(error_category_of([&] { parse_idx(lab, lab); }) == ErrorCategory::Format);
  try {
    parse_idx(lab, lab);
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("2051") != std::string::npos);
  }
  // And images passed as labels.
  CHECK(error_category_of([&] { parse_idx(img, img); }) == ErrorCategory::Format);
}

TEST_CASE("truncated streams and count mismatches are format errors") {
  const std::vector<unsigned char> pixels(8, 7);
  auto img = idx_image_bytes(2, 2, 2, pixels);
  const auto lab = idx_label_bytes(std::vector<unsigned char>{1, 0});

  auto truncated = img;
  truncated.resize(truncated.size() - 3);
  CHECK(error_category_of([&] { parse_idx(truncated, lab); }) == ErrorCategory::Format);

  std::vector<unsigned char> tiny(img.begin(), img.begin() + 6);  // inside the header
  CHECK(error_category_of([&] { parse_idx(tiny, lab); }) == ErrorCategory::Format);

  const auto lab3 = idx_label_bytes(std::vector<unsigned char>{1, 0, 1});
  CHECK(error_category_of([&] { parse_idx(img, lab3); }) == ErrorCategory::Format);
}

TEST_CASE("gzip-compressed idx files load transparently") {
  testutil::TempDir dir;
  const std::vector<double> expect = testutil::write_idx_fixture(dir.path(), true);
  REQUIRE(mnist_split_present(dir.path(), true));
  const LabeledDataset ds = load_mnist_split(dir.path(), true);
  CHECK(ds.size() == 2);
  CHECK(ds.labels == std::vector<int>{3, 7});
  for (int i = 0; i < 8; ++i)
    CHECK(ds.features(i / 4, i % 4) == expect[static_cast<std::size_t>(i)]);
}

TEST_CASE("plain idx files load via the same path") {
  testutil::TempDir dir;
  const std::vector<double> expect = testutil::write_idx_fixture(dir.path(), false);
  const LabeledDataset ds = load_mnist_split(dir.path(), true);
  CHECK(ds.size() == 2);
  for (int i = 0; i < 8; ++i)
    CHECK(ds.features(i / 4, i % 4) == expect[static_cast<std::size_t>(i)]);
  CHECK_FALSE(mnist_split_present(dir.path(), false));  // no t10k files written
}

TEST_CASE("missing files are io errors") {
  testutil::TempDir dir;
  CHECK(error_category_of([&] { load_mnist_split(dir.path(), true); }) == ErrorCategory::Io);
  CHECK(error_category_of([&] { read_file_maybe_gzip(dir.file("nope.bin")); }) == ErrorCategory::Io);
}

TEST_CASE("corrupt gzip payload is a format error") {
  testutil::TempDir dir;
  std::vector<unsigned char> junk = {0x1f, 0x8b, 0x08, 0x00, 1, 2, 3, 4, 5, 6, 7, 8};
  testutil::write_bytes(dir.file("bad.gz"), junk);
  CHECK(error_category_of([&] { read_file_maybe_gzip(dir.file("bad.gz")); }) == ErrorCategory::Format);
}

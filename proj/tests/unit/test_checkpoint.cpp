#include <doctest.h>

#include <cstring>
#include <fstream>

#include "sharpnorm/checkpoint.hpp"
#include "sharpnorm/error.hpp"
#include "sharpnorm/json_codec.hpp"
#include "sharpnorm/net_ops.hpp"
#include "test_util.hpp"

using namespace sharpnorm;
using testutil::error_category_of;

namespace {

NetworkSpec sample_net() {
  return NetworkSpec({dense(4, 5), relu(), dense(5, 3)}, {4}, 3);
}

}  // namespace

TEST_CASE("checkpoints round-trip parameters bit-exactly with a merged manifest") {
  testutil::TempDir tmp;
  const NetworkSpec net = sample_net();
  const ParamStore p = testutil::random_params(net, 17, 1.3);

  nlohmann::json extra;
  extra["train_accuracy"] = 0.753;
  extra["note"] = "fixture";
  const std::string path = tmp.file("model.ckpt");
  save_checkpoint(path, net, p, extra);

  const LoadedCheckpoint ck = load_checkpoint(path);
  REQUIRE(ck.params.total_params() == p.total_params());
  for (std::size_t i = 0; i < p.total_params(); ++i) CHECK(ck.params.flat()[i] == p.flat()[i]);

  CHECK(ck.manifest["train_accuracy"] == 0.753);
  CHECK(ck.manifest["note"] == "fixture");
  CHECK(ck.manifest["format_version"] == kCheckpointVersion);
  CHECK(ck.manifest["total_params"] == p.total_params());
  CHECK(network_to_json(ck.net) == network_to_json(net));

  // The restored model computes the same function.
  const RowMat X = testutil::random_batch(6, 4, 18);
  CHECK((forward_batch(ck.net, ck.params, X) - forward_batch(net, p, X)).cwiseAbs().maxCoeff() ==
        0.0);
}

TEST_CASE("special float values survive the round trip") {
  testutil::TempDir tmp;
  NetworkSpec net({dense(2, 2, false)}, {2}, 2);
  ParamStore p = ParamStore::zeros(net);
  p.flat()[0] = -0.0;
  p.flat()[1] = 5e-324;  // smallest subnormal
  p.flat()[2] = 1.7976931348623157e308;
  p.flat()[3] = 1.0 / 3.0;
  const std::string path = tmp.file("edge.ckpt");
  save_checkpoint(path, net, p);
  const LoadedCheckpoint ck = load_checkpoint(path);
  for (std::size_t i = 0; i < p.total_params(); ++i) {
    CHECK(std::memcmp(&ck.params.flat()[i], &p.flat()[i], sizeof(double)) == 0);
  }
}

TEST_CASE("corrupted checkpoints are rejected with precise categories") {
  testutil::TempDir tmp;
  const NetworkSpec net = sample_net();
  const ParamStore p = testutil::random_params(net, 23);
  const std::string good_path = tmp.file("good.ckpt");
  save_checkpoint(good_path, net, p);
  const std::vector<unsigned char> good = testutil::read_bytes(good_path);

  auto rejected_as = [&](std::vector<unsigned char> bytes, const char* name) {
    const std::string path = tmp.file(name);
    testutil::write_bytes(path, bytes);
    return error_category_of([&] { (void)load_checkpoint(path); });
  };

  SUBCASE("bad magic") {
    std::vector<unsigned char> bytes = good;
    bytes[0] = 'X';
    CHECK(rejected_as(bytes, "magic.ckpt") == ErrorCategory::Format);
  }

  SUBCASE("unsupported version") {
    std::vector<unsigned char> bytes = good;
    bytes[4] = 2;  // little-endian u32 version field
    CHECK(rejected_as(bytes, "version.ckpt") == ErrorCategory::Version);
  }

  SUBCASE("truncations at every boundary") {
    const std::size_t manifest_len =
        static_cast<std::size_t>(good[8]) | (static_cast<std::size_t>(good[9]) << 8);
    const std::size_t header = 4 + 4 + 8;
    for (std::size_t cut : {std::size_t{2}, std::size_t{6}, std::size_t{10},
                            header + manifest_len / 2, header + manifest_len + 16}) {
      std::vector<unsigned char> bytes(good.begin(), good.begin() + static_cast<long>(cut));
      CHECK(rejected_as(bytes, "cut.ckpt") == ErrorCategory::Format);
    }
  }

  SUBCASE("trailing bytes") {
    std::vector<unsigned char> bytes = good;
    bytes.push_back(0);
    CHECK(rejected_as(bytes, "trailing.ckpt") == ErrorCategory::Format);
  }

  SUBCASE("manifest is not json") {
    std::vector<unsigned char> bytes = good;
    for (std::size_t i = 16; i < 24; ++i) bytes[i] = '~';
    CHECK(rejected_as(bytes, "garbage.ckpt") == ErrorCategory::Format);
  }
}

TEST_CASE("manifest net and weight blob must agree") {
  testutil::TempDir tmp;

  auto write_custom = [&](const nlohmann::json& manifest, std::size_t n_doubles,
                          const char* name) {
    const std::string path = tmp.file(name);
    std::ofstream out(path, std::ios::binary);
    out.write(kCheckpointMagic, 4);
    const std::uint32_t version = kCheckpointVersion;
    out.write(reinterpret_cast<const char*>(&version), 4);
    const std::string body = manifest.dump();
    const std::uint64_t len = body.size();
    out.write(reinterpret_cast<const char*>(&len), 8);
    out.write(body.data(), static_cast<std::streamsize>(body.size()));
    const std::vector<double> zeros(n_doubles, 0.0);
    out.write(reinterpret_cast<const char*>(zeros.data()),
              static_cast<std::streamsize>(n_doubles * sizeof(double)));
    return path;
  };

  const NetworkSpec net = sample_net();  // 4*5+5+5*3+3 = 43 params

  nlohmann::json ok;
  ok["net"] = network_to_json(net);
  ok["total_params"] = 43;
  CHECK(load_checkpoint(write_custom(ok, 43, "ok.ckpt")).params.total_params() == 43);

  nlohmann::json wrong_count = ok;
  wrong_count["total_params"] = 44;
  CHECK(error_category_of([&] { load_checkpoint(write_custom(wrong_count, 44, "n.ckpt")); }) ==
        ErrorCategory::Format);

  nlohmann::json no_net;
  no_net["total_params"] = 43;
  CHECK(error_category_of([&] { load_checkpoint(write_custom(no_net, 43, "nonet.ckpt")); }) ==
        ErrorCategory::Format);
}

TEST_CASE("missing files raise io errors") {
  testutil::TempDir tmp;
  CHECK(error_category_of([&] { (void)load_checkpoint(tmp.file("absent.ckpt")); }) ==
        ErrorCategory::Io);
  CHECK(error_category_of([&] {
          save_checkpoint(tmp.path() + "/no/such/dir/m.ckpt", sample_net(),
                          ParamStore::zeros(sample_net()));
        }) == ErrorCategory::Io);
}

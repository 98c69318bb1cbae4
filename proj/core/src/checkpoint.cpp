#include "sharpnorm/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "sharpnorm/error.hpp"
#include "sharpnorm/json_codec.hpp"

namespace sharpnorm {

static_assert(std::endian::native == std::endian::little,
              "checkpoint writer assumes a little-endian host");

namespace {

void write_u32(std::ofstream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void write_u64(std::ofstream& out, std::uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T read_raw(std::ifstream& in, const std::string& path, const char* what) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  require(in.gcount() == sizeof v, ErrorCategory::Format,
          path + ": truncated while reading " + what);
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const NetworkSpec& net, const ParamStore& params,
                     const nlohmann::json& extra_manifest) {
  nlohmann::json manifest = extra_manifest;
  manifest["format_version"] = kCheckpointVersion;
  manifest["net"] = network_to_json(net);
  manifest["total_params"] = params.total_params();
  const std::string manifest_bytes = manifest.dump();

  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorCategory::Io, "cannot open " + path + " for writing");
  out.write(kCheckpointMagic, sizeof kCheckpointMagic);
  write_u32(out, kCheckpointVersion);
  write_u64(out, manifest_bytes.size());
  out.write(manifest_bytes.data(), static_cast<std::streamsize>(manifest_bytes.size()));
  out.write(reinterpret_cast<const char*>(params.flat().data()),
            static_cast<std::streamsize>(params.total_params() * sizeof(double)));
  out.flush();
  require(out.good(), ErrorCategory::Io, "write failed for " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorCategory::Io, "cannot open " + path);

  char magic[4];
  in.read(magic, sizeof magic);
  require(in.gcount() == sizeof magic && std::memcmp(magic, kCheckpointMagic, 4) == 0,
          ErrorCategory::Format, path + ": not a checkpoint (bad magic)");

  const auto version = read_raw<std::uint32_t>(in, path, "version");
  require(version == kCheckpointVersion, ErrorCategory::Version,
          path + ": unsupported checkpoint version " + std::to_string(version) + " (reader is " +
              std::to_string(kCheckpointVersion) + ")");

  const auto manifest_len = read_raw<std::uint64_t>(in, path, "manifest length");
  std::string manifest_bytes(manifest_len, '\0');
  in.read(manifest_bytes.data(), static_cast<std::streamsize>(manifest_len));
  require(static_cast<std::uint64_t>(in.gcount()) == manifest_len, ErrorCategory::Format,
          path + ": truncated manifest");

  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(manifest_bytes);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCategory::Format, path + ": manifest is not valid JSON: " + e.what());
  }
  require(manifest.contains("net"), ErrorCategory::Format, path + ": manifest lacks 'net'");

  LoadedCheckpoint ck{network_from_json(manifest["net"]), {}, std::move(manifest)};
  ck.params = ParamStore::zeros(ck.net);

  const std::uint64_t declared =
      ck.manifest.value("total_params", static_cast<std::uint64_t>(ck.params.total_params()));
  require(declared == ck.params.total_params(), ErrorCategory::Format,
          path + ": manifest total_params disagrees with the architecture");

  in.read(reinterpret_cast<char*>(ck.params.flat().data()),
          static_cast<std::streamsize>(ck.params.total_params() * sizeof(double)));
  require(static_cast<std::size_t>(in.gcount()) == ck.params.total_params() * sizeof(double),
          ErrorCategory::Format, path + ": truncated weight blob");
  in.peek();
  require(in.eof(), ErrorCategory::Format, path + ": trailing bytes after weight blob");
  return ck;
}

}  // namespace sharpnorm

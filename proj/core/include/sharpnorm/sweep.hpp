#pragma once

#include <iosfwd>

#include "sharpnorm/json_codec.hpp"
#include "sharpnorm/report_io.hpp"
#include "sharpnorm/sharpness.hpp"
#include "sharpnorm/trainer.hpp"

namespace sharpnorm {

struct BlobsConfig {
  int num_classes = 10;
  int per_class = 500;       // training samples per class
  int test_per_class = 100;  // held-out samples per class, same cluster centers
  int dim = 784;
  double spread = 0.35;
  std::uint64_t seed = 7;
};

struct DataConfig {
  enum class Source { Mnist, Blobs };
  Source source = Source::Blobs;
  std::string dir;        // MNIST directory; may be empty if resolved externally
  int train_subset = 0;   // 0 = use everything
  int test_subset = 0;
  std::uint64_t subset_seed = 0;
  BlobsConfig blobs;
};

struct DatasetPair {
  LabeledDataset train;
  LabeledDataset test;
};

// Loads (and optionally subsets) the train/test pair. For blobs, train and
// test are split from one generation so they share cluster centers.
DatasetPair load_data(const DataConfig& cfg);

// Resolution order for the MNIST directory: explicit flag, config value,
// SHARPNORM_DATA environment variable.
std::string resolve_data_dir(const std::string& flag_value, const std::string& config_value);

struct SweepConfig {
  NetworkSpec net;
  DataConfig data;
  std::vector<double> ratios;
  std::vector<std::uint64_t> seeds;
  TrainConfig train;       // seed field is overridden per run
  MeasureOptions measure;  // probe seed is overridden per run
  int parallelism = 1;
};

DataConfig data_config_from_json(const nlohmann::json& j);
nlohmann::json data_config_to_json(const DataConfig& cfg);
SweepConfig sweep_config_from_json(const nlohmann::json& j);
MeasureOptions measure_options_from_json(const nlohmann::json& j);

// Runs the ratios × seeds grid: corrupt → train → evaluate → measure. Rows
// come back in run-id order regardless of the execution interleaving.
std::vector<SweepRow> run_sweep(const SweepConfig& cfg, std::ostream* progress = nullptr);

// Single training run used by cmd_train: corrupts (optionally), trains and
// evaluates; exposed so the CLI shares one code path with tests.
RunRecord run_single(const NetworkSpec& net, const DatasetPair& data, const TrainConfig& cfg,
                     const std::optional<CorruptionInfo>& corruption);

}  // namespace sharpnorm

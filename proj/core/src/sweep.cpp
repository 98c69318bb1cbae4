#include "sharpnorm/sweep.hpp"

#include <cstdlib>
#include <future>
#include <ostream>

#include "sharpnorm/error.hpp"
#include "sharpnorm/idx.hpp"
#include "sharpnorm/rng.hpp"

namespace sharpnorm {

using nlohmann::json;

DatasetPair load_data(const DataConfig& cfg) {
  DatasetPair pair;
  if (cfg.source == DataConfig::Source::Mnist) {
    require(!cfg.dir.empty(), ErrorCategory::Argument,
            "no MNIST directory given (flag, config, or SHARPNORM_DATA)");
    pair.train = load_mnist_split(cfg.dir, true);
    pair.test = load_mnist_split(cfg.dir, false);
  } else {
    const auto& b = cfg.blobs;
    const LabeledDataset all =
        synth_blobs(b.num_classes, b.per_class + b.test_per_class, b.dim, b.spread, b.seed);
    std::vector<int> train_idx, test_idx;
    for (int c = 0; c < b.num_classes; ++c) {
      const int base = c * (b.per_class + b.test_per_class);
      for (int s = 0; s < b.per_class; ++s) train_idx.push_back(base + s);
      for (int s = 0; s < b.test_per_class; ++s) test_idx.push_back(base + b.per_class + s);
    }
    pair.train = all.subset(train_idx);
    pair.test = all.subset(test_idx);
  }
  if (cfg.train_subset > 0)
    pair.train = shuffled_subset(pair.train, cfg.train_subset, cfg.subset_seed);
  if (cfg.test_subset > 0)
    pair.test = shuffled_subset(pair.test, cfg.test_subset, mix_seed(cfg.subset_seed, 1));
  return pair;
}

std::string resolve_data_dir(const std::string& flag_value, const std::string& config_value) {
  if (!flag_value.empty()) return flag_value;
  if (!config_value.empty()) return config_value;
  if (const char* env = std::getenv("SHARPNORM_DATA"); env && *env) return env;
  return {};
}

DataConfig data_config_from_json(const json& j) {
  DataConfig cfg;
  const auto source = j.value("source", std::string("blobs"));
  if (source == "mnist")
    cfg.source = DataConfig::Source::Mnist;
  else if (source == "blobs")
    cfg.source = DataConfig::Source::Blobs;
  else
    fail(ErrorCategory::Format, "unknown data source '" + source + "'");
  cfg.dir = j.value("dir", std::string());
  cfg.train_subset = j.value("train_subset", 0);
  cfg.test_subset = j.value("test_subset", 0);
  cfg.subset_seed = j.value("subset_seed", std::uint64_t{0});
  if (j.contains("blobs")) {
    const json& b = j["blobs"];
    cfg.blobs.num_classes = b.value("num_classes", cfg.blobs.num_classes);
    cfg.blobs.per_class = b.value("per_class", cfg.blobs.per_class);
    cfg.blobs.test_per_class = b.value("test_per_class", cfg.blobs.test_per_class);
    cfg.blobs.dim = b.value("dim", cfg.blobs.dim);
    cfg.blobs.spread = b.value("spread", cfg.blobs.spread);
    cfg.blobs.seed = b.value("seed", cfg.blobs.seed);
  }
  return cfg;
}

json data_config_to_json(const DataConfig& cfg) {
  json j;
  j["source"] = cfg.source == DataConfig::Source::Mnist ? "mnist" : "blobs";
  if (!cfg.dir.empty()) j["dir"] = cfg.dir;
  j["train_subset"] = cfg.train_subset;
  j["test_subset"] = cfg.test_subset;
  j["subset_seed"] = cfg.subset_seed;
  j["blobs"] = {{"num_classes", cfg.blobs.num_classes}, {"per_class", cfg.blobs.per_class},
                {"test_per_class", cfg.blobs.test_per_class}, {"dim", cfg.blobs.dim},
                {"spread", cfg.blobs.spread}, {"seed", cfg.blobs.seed}};
  return j;
}

MeasureOptions measure_options_from_json(const json& j) {
  MeasureOptions opt;
  opt.loss = loss_from_string(j.value("loss", std::string("nsce")));
  opt.lambda = j.value("lambda", opt.lambda);
  if (j.contains("probes")) opt.probes = probe_config_from_json(j["probes"]);
  opt.use_exact_oracle = j.value("exact_oracle", false);
  opt.oracle_step = j.value("oracle_step", opt.oracle_step);
  opt.with_fisher_rao = j.value("fisher_rao", true);
  opt.with_noise_based = j.value("noise_based", false);
  opt.noise_mc_samples = j.value("noise_mc_samples", opt.noise_mc_samples);
  return opt;
}

SweepConfig sweep_config_from_json(const json& j) {
  SweepConfig cfg;
  require(j.contains("net"), ErrorCategory::Format, "sweep config lacks 'net'");
  cfg.net = network_from_json(j["net"]);
  if (j.contains("data")) cfg.data = data_config_from_json(j["data"]);
  cfg.ratios = j.value("ratios", std::vector<double>{0.0, 0.5, 1.0});
  cfg.seeds = j.value("seeds", std::vector<std::uint64_t>{1, 2, 3});
  if (j.contains("train")) cfg.train = train_config_from_json(j["train"]);
  if (j.contains("measure")) cfg.measure = measure_options_from_json(j["measure"]);
  cfg.parallelism = j.value("parallelism", 1);
  require(!cfg.ratios.empty() && !cfg.seeds.empty(), ErrorCategory::Argument,
          "sweep needs at least one ratio and one seed");
  require(cfg.parallelism >= 1, ErrorCategory::Argument, "parallelism must be >= 1");
  return cfg;
}

RunRecord run_single(const NetworkSpec& net, const DatasetPair& data, const TrainConfig& cfg,
                     const std::optional<CorruptionInfo>& corruption) {
  LabeledDataset train_ds =
      corruption ? corrupt_labels(data.train, corruption->ratio, corruption->seed) : data.train;
  RunRecord rec = train(net, train_ds, cfg);
  rec.train_accuracy = evaluate(net, rec.params, train_ds);
  rec.test_accuracy = evaluate(net, rec.params, data.test);
  rec.gap = accuracy_gap(rec.train_accuracy, rec.test_accuracy);
  return rec;
}

std::vector<SweepRow> run_sweep(const SweepConfig& cfg, std::ostream* progress) {
  const DatasetPair data = load_data(cfg.data);
  const int n_runs = static_cast<int>(cfg.ratios.size() * cfg.seeds.size());
  std::vector<SweepRow> rows(static_cast<std::size_t>(n_runs));

  auto run_one = [&](int run_id) {
    const auto ratio_idx = static_cast<std::size_t>(run_id) / cfg.seeds.size();
    const auto seed_idx = static_cast<std::size_t>(run_id) % cfg.seeds.size();
    const double ratio = cfg.ratios[ratio_idx];
    const std::uint64_t seed = cfg.seeds[seed_idx];

    TrainConfig tc = cfg.train;
    tc.seed = seed;
    const LabeledDataset train_ds = corrupt_labels(data.train, ratio, seed);
    RunRecord rec = train(cfg.net, train_ds, tc);
    rec.train_accuracy = evaluate(cfg.net, rec.params, train_ds);
    rec.test_accuracy = evaluate(cfg.net, rec.params, data.test);
    rec.gap = accuracy_gap(rec.train_accuracy, rec.test_accuracy);

    MeasureOptions mo = cfg.measure;
    mo.with_fisher_rao = true;  // the sweep table has a fisher_rao column
    mo.probes.seed = mix_seed(seed, 0x6d656173ULL);
    const SharpnessReport rep =
        measure_sharpness(cfg.net, rec.params, train_ds.features, train_ds.labels, mo);

    SweepRow row;
    row.run_id = run_id;
    row.corruption_ratio = ratio;
    row.seed = seed;
    row.train_acc = rec.train_accuracy;
    row.test_acc = rec.test_accuracy;
    row.gap = rec.gap;
    row.trace_sharpness = rep.trace_sharpness;
    row.frobenius_sq_sum = rep.frobenius_sq_sum;
    row.matrix_normalized = rep.matrix_normalized;
    row.normalized = rep.normalized;
    row.fisher_rao = rep.fisher_rao.value_or(0.0);
    rows[static_cast<std::size_t>(run_id)] = row;
    if (progress)
      (*progress) << "run " << run_id << ": ratio=" << ratio << " seed=" << seed
                  << " train=" << row.train_acc << " test=" << row.test_acc
                  << " gap=" << row.gap << " normalized=" << row.normalized << "\n";
  };

  if (cfg.parallelism <= 1) {
    for (int id = 0; id < n_runs; ++id) run_one(id);
  } else {
    // Bounded fan-out; rows land at their run-id slot so output order is
    // deterministic no matter how the futures interleave.
    for (int base = 0; base < n_runs; base += cfg.parallelism) {
      std::vector<std::future<void>> batch;
      const int end = std::min(base + cfg.parallelism, n_runs);
      batch.reserve(static_cast<std::size_t>(end - base));
      for (int id = base; id < end; ++id)
        batch.push_back(std::async(std::launch::async, run_one, id));
      for (auto& f : batch) f.get();
    }
  }
  return rows;
}

}  // namespace sharpnorm

// sharpnorm: train small classifiers, estimate loss curvature, and compute
// scale-invariant sharpness metrics alongside the classical baselines.

#include <CLI11.hpp>
#include <iostream>

#include "sharpnorm/checkpoint.hpp"
#include "sharpnorm/demo.hpp"
#include "sharpnorm/error.hpp"
#include "sharpnorm/rng.hpp"
#include "sharpnorm/sweep.hpp"

namespace {

using nlohmann::json;
using namespace sharpnorm;

struct TrainFileConfig {
  NetworkSpec net;
  DataConfig data;
  TrainConfig train;
  std::optional<CorruptionInfo> corruption;
};

TrainFileConfig train_file_config(const json& j) {
  TrainFileConfig cfg;
  require(j.contains("net"), ErrorCategory::Format, "config lacks 'net'");
  cfg.net = network_from_json(j["net"]);
  if (j.contains("data")) cfg.data = data_config_from_json(j["data"]);
  if (j.contains("train")) cfg.train = train_config_from_json(j["train"]);
  if (j.contains("corruption")) cfg.corruption = corruption_from_json(j["corruption"]);
  return cfg;
}

int cmd_train(const std::string& config_path, const std::string& data_flag,
              const std::string& out_path) {
  const json j = load_json_file(config_path);
  TrainFileConfig cfg = train_file_config(j);
  cfg.data.dir = resolve_data_dir(data_flag, cfg.data.dir);

  const DatasetPair data = load_data(cfg.data);
  const RunRecord rec = run_single(cfg.net, data, cfg.train, cfg.corruption);

  json manifest;
  manifest["train_config"] = train_config_to_json(cfg.train);
  manifest["data"] = data_config_to_json(cfg.data);
  if (rec.corruption) manifest["corruption"] = corruption_to_json(*rec.corruption);
  manifest["train_accuracy"] = rec.train_accuracy;
  manifest["test_accuracy"] = rec.test_accuracy;
  manifest["gap"] = rec.gap;
  manifest["loss_curve"] = rec.loss_curve;
  save_checkpoint(out_path, cfg.net, rec.params, manifest);

  std::cout << "trained: train_acc=" << rec.train_accuracy << " test_acc=" << rec.test_accuracy
            << " gap=" << rec.gap << " -> " << out_path << "\n";
  return 0;
}

int cmd_measure(const std::string& ckpt_path, const std::string& data_flag,
                const std::string& loss_name, double lambda, int probes, std::uint64_t seed,
                const std::string& out_path) {
  const LoadedCheckpoint ck = load_checkpoint(ckpt_path);
  require(ck.manifest.contains("data"), ErrorCategory::Format,
          ckpt_path + ": manifest lacks the 'data' section needed to reload the dataset");

  DataConfig data_cfg = data_config_from_json(ck.manifest["data"]);
  data_cfg.dir = resolve_data_dir(data_flag, data_cfg.dir);
  const DatasetPair data = load_data(data_cfg);

  LabeledDataset train_ds = data.train;
  if (ck.manifest.contains("corruption")) {
    const CorruptionInfo c = corruption_from_json(ck.manifest["corruption"]);
    train_ds = corrupt_labels(data.train, c.ratio, c.seed);
  }

  MeasureOptions opt;
  opt.loss = loss_from_string(loss_name);
  opt.lambda = lambda;
  opt.probes.num_probes = probes;
  opt.probes.seed = seed;
  const SharpnessReport rep =
      measure_sharpness(ck.net, ck.params, train_ds.features, train_ds.labels, opt);

  json out = report_to_json(rep);
  out["checkpoint"] = ckpt_path;
  save_json_file(out_path, out);
  std::cout << "measured: normalized=" << rep.normalized << " trace=" << rep.trace_sharpness
            << " -> " << out_path << "\n";
  return 0;
}

int cmd_rescale_demo(const std::string& config_path, const std::string& out_path) {
  const DemoConfig cfg = demo_config_from_json(load_json_file(config_path));
  const json result = run_rescale_demo(cfg);
  if (!out_path.empty()) save_json_file(out_path, result);
  std::cout << result.dump(2) << "\n";
  return 0;
}

int cmd_sweep(const std::string& config_path, const std::string& data_flag,
              const std::string& out_path) {
  SweepConfig cfg = sweep_config_from_json(load_json_file(config_path));
  cfg.data.dir = resolve_data_dir(data_flag, cfg.data.dir);
  const std::vector<SweepRow> rows = run_sweep(cfg, &std::cerr);
  write_sweep_csv(out_path, rows);
  std::cout << "sweep: " << rows.size() << " rows -> " << out_path << "\n";
  return 0;
}

int cmd_report(const std::string& in_path, const std::string& out_path) {
  const std::vector<SweepRow> rows = read_sweep_csv(in_path);
  const json rep = correlation_report(rows);
  save_json_file(out_path, rep);
  std::cout << "report: " << rows.size() << " rows -> " << out_path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sharpness metrics for small neural networks"};
  app.require_subcommand(1);

  std::string config_path, ckpt_path, data_dir, in_path, out_path;
  std::string loss_name = "nsce";
  double lambda = 0.5;
  int probes = 100;
  std::uint64_t seed = 0;

  auto* train = app.add_subcommand("train", "train a model from a JSON config");
  train->add_option("--config", config_path, "JSON config file")->required();
  train->add_option("--out", out_path, "output checkpoint path")->required();
  train->add_option("--data", data_dir, "data directory (falls back to $SHARPNORM_DATA)");

  auto* measure = app.add_subcommand("measure", "measure sharpness metrics of a checkpoint");
  measure->add_option("--ckpt", ckpt_path, "checkpoint path")->required();
  measure->add_option("--data", data_dir, "data directory (falls back to $SHARPNORM_DATA)");
  measure->add_option("--loss", loss_name, "curvature loss: nsce|ce")
      ->check(CLI::IsMember({"nsce", "ce"}));
  measure->add_option("--lambda", lambda, "variance-penalty weight");
  measure->add_option("--probes", probes, "Hutchinson probe count");
  measure->add_option("--seed", seed, "probe seed");
  measure->add_option("--out", out_path, "output report JSON")->required();

  auto* demo = app.add_subcommand("rescale-demo", "apply function-preserving rescalings");
  demo->add_option("--config", config_path, "JSON config file")->required();
  demo->add_option("--out", out_path, "also write the JSON result here");

  auto* sweep = app.add_subcommand("sweep", "run a corruption-ratio x seed training grid");
  sweep->add_option("--config", config_path, "JSON config file")->required();
  sweep->add_option("--out", out_path, "output CSV path")->required();
  sweep->add_option("--data", data_dir, "data directory (falls back to $SHARPNORM_DATA)");

  auto* report = app.add_subcommand("report", "correlations and plot columns from a sweep CSV");
  report->add_option("--in", in_path, "input sweep CSV")->required();
  report->add_option("--out", out_path, "output JSON path")->required();

  try {
    app.parse(argc, argv);
    if (app.got_subcommand(train)) return cmd_train(config_path, data_dir, out_path);
    if (app.got_subcommand(measure))
      return cmd_measure(ckpt_path, data_dir, loss_name, lambda, probes, seed, out_path);
    if (app.got_subcommand(demo)) return cmd_rescale_demo(config_path, out_path);
    if (app.got_subcommand(sweep)) return cmd_sweep(config_path, data_dir, out_path);
    if (app.got_subcommand(report)) return cmd_report(in_path, out_path);
    return 1;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    std::cerr << "error: argument: " << e.what() << "\n";
    return 1;
  } catch (const sharpnorm::Error& e) {
    std::cerr << "error: " << to_string(e.category()) << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << "\n";
    return 1;
  }
}

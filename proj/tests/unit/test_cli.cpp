#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include "sharpnorm/checkpoint.hpp"
#include "sharpnorm/report_io.hpp"
#include "sharpnorm/sweep.hpp"
#include "test_util.hpp"

using namespace sharpnorm;

namespace {

struct CliResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const std::string& cli_bin() {
  static const std::string bin = [] {
    const char* env = std::getenv("SHARPNORM_BIN");
    REQUIRE_MESSAGE(env != nullptr, "SHARPNORM_BIN must point at the built binary");
    return std::string(env);
  }();
  return bin;
}

CliResult run_cli(const std::string& args, const testutil::TempDir& tmp,
                  const std::string& env_prefix = "") {
  static int counter = 0;
  const std::string out_file = tmp.file("cli-out-" + std::to_string(counter));
  const std::string err_file = tmp.file("cli-err-" + std::to_string(counter));
  ++counter;
  const std::string cmd = env_prefix + "'" + cli_bin() + "' " + args + " >'" + out_file +
                          "' 2>'" + err_file + "'";
  const int raw = std::system(cmd.c_str());
  CliResult r;
  r.exit_code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  r.out = slurp(out_file);
  r.err = slurp(err_file);
  return r;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

const char* kTrainConfig = R"({
  "net": {
    "input_shape": [4],
    "num_classes": 3,
    "layers": [
      {"type": "dense", "in": 4, "out": 8},
      {"type": "relu"},
      {"type": "dense", "in": 8, "out": 3}
    ]
  },
  "data": {
    "source": "blobs",
    "blobs": {"num_classes": 3, "per_class": 10, "test_per_class": 5,
               "dim": 4, "spread": 0.05, "seed": 9}
  },
  "train": {
    "optimizer": {"type": "adam", "lr": 0.02},
    "epochs": 15, "batch_size": 5, "seed": 2, "loss": "ce"
  },
  "corruption": {"ratio": 0.3, "seed": 7}
})";

const char* kDemoConfig = R"({
  "net": {
    "input_shape": [2],
    "num_classes": 2,
    "layers": [
      {"type": "dense", "in": 2, "out": 2, "bias": false},
      {"type": "relu"},
      {"type": "dense", "in": 2, "out": 2, "bias": false}
    ]
  },
  "weights": [[[1, 2], [3, 4]], [[5, 6], [7, 8]]],
  "ops": [
    {"kind": "row_col", "layer": 0, "index": 0, "alpha": 10.0},
    {"kind": "row_col", "layer": 0, "index": 1, "alpha": 0.1}
  ],
  "probe_count": 50,
  "measure_metrics": true,
  "loss": "ce"
})";

const char* kSweepConfig = R"({
  "net": {
    "input_shape": [4],
    "num_classes": 3,
    "layers": [
      {"type": "dense", "in": 4, "out": 6},
      {"type": "relu"},
      {"type": "dense", "in": 6, "out": 3}
    ]
  },
  "data": {
    "source": "blobs",
    "blobs": {"num_classes": 3, "per_class": 10, "test_per_class": 5,
               "dim": 4, "spread": 0.05, "seed": 9}
  },
  "ratios": [0.0, 1.0],
  "seeds": [1, 2],
  "train": {"epochs": 3, "batch_size": 8},
  "measure": {"probes": {"num_probes": 15, "seed": 1}}
})";

}  // namespace

TEST_CASE("cli: help and argument errors") {
  ::unsetenv("SHARPNORM_DATA");
  testutil::TempDir tmp;

  const CliResult help = run_cli("--help", tmp);
  CHECK(help.exit_code == 0);
  CHECK(help.out.find("train") != std::string::npos);
  CHECK(help.out.find("measure") != std::string::npos);
  CHECK(help.out.find("sweep") != std::string::npos);

  const CliResult none = run_cli("", tmp);
  CHECK(none.exit_code == 1);
  CHECK(none.err.rfind("error: argument:", 0) == 0);

  const CliResult unknown = run_cli("train --config x --out y --bogus", tmp);
  CHECK(unknown.exit_code == 1);
  CHECK(unknown.err.rfind("error: argument:", 0) == 0);

  const CliResult missing_flag = run_cli("measure --out r.json", tmp);
  CHECK(missing_flag.exit_code == 1);
  CHECK(missing_flag.err.rfind("error: argument:", 0) == 0);
  CHECK(missing_flag.err.find("--ckpt") != std::string::npos);
}

TEST_CASE("cli: full train -> measure -> demo -> sweep -> report chain") {
  ::unsetenv("SHARPNORM_DATA");
  testutil::TempDir tmp;

  // --- train ----------------------------------------------------------------
  const std::string cfg_path = tmp.file("train.json");
  write_text(cfg_path, kTrainConfig);
  const std::string ckpt_path = tmp.file("model.ckpt");
  const CliResult tr = run_cli("train --config '" + cfg_path + "' --out '" + ckpt_path + "'", tmp);
  CHECK(tr.exit_code == 0);
  CHECK(tr.out.find("trained:") != std::string::npos);

  const LoadedCheckpoint ck = load_checkpoint(ckpt_path);
  CHECK(ck.manifest["train_accuracy"].get<double>() >= 0.0);
  CHECK(ck.manifest["corruption"]["ratio"].get<double>() == 0.3);
  CHECK(ck.manifest["data"]["source"] == "blobs");
  CHECK(ck.manifest["loss_curve"].size() == 15);

  // --- measure ---------------------------------------------------------------
  const std::string report_path = tmp.file("report.json");
  const CliResult ms = run_cli("measure --ckpt '" + ckpt_path +
                                   "' --loss nsce --lambda 0.5 --probes 30 --seed 3 --out '" +
                                   report_path + "'",
                               tmp);
  CHECK(ms.exit_code == 0);
  CHECK(ms.out.find("measured:") != std::string::npos);

  const nlohmann::json rep = nlohmann::json::parse(slurp(report_path));
  CHECK(rep["curvature"] == "hutchinson");
  CHECK(rep["probes_used"] == 30);
  CHECK(rep["lambda"] == 0.5);
  CHECK(rep["loss"] == "nsce");
  CHECK(rep["checkpoint"] == ckpt_path);
  CHECK(rep["normalized"].get<double>() >= 0.0);
  CHECK(rep["per_array"].size() == 4);

  // Rejected loss name fails at argument parsing.
  const CliResult bad_loss = run_cli(
      "measure --ckpt '" + ckpt_path + "' --loss huber --out '" + report_path + "'", tmp);
  CHECK(bad_loss.exit_code == 1);
  CHECK(bad_loss.err.rfind("error: argument:", 0) == 0);

  // --- rescale-demo ------------------------------------------------------------
  const std::string demo_path = tmp.file("demo.json");
  write_text(demo_path, kDemoConfig);
  const std::string demo_out = tmp.file("demo-out.json");
  const CliResult dm =
      run_cli("rescale-demo --config '" + demo_path + "' --out '" + demo_out + "'", tmp);
  CHECK(dm.exit_code == 0);

  const nlohmann::json demo = nlohmann::json::parse(dm.out);
  CHECK(demo["after"]["forward_max_abs_diff"].get<double>() <= 1e-9);
  CHECK(demo["after"]["norms"][0]["frobenius_sq"].get<double>() ==
        doctest::Approx(2500.05).epsilon(1e-9));
  // The normalized metric is invariant under the applied rescalings while the
  // weight norms visibly move.
  const double norm_before = demo["before"]["metrics"]["normalized"].get<double>();
  const double norm_after = demo["after"]["metrics"]["normalized"].get<double>();
  CHECK(testutil::rel_err(norm_after, norm_before) <= 1e-4);
  const double fro_before = demo["before"]["metrics"]["frobenius_sq_sum"].get<double>();
  const double fro_after = demo["after"]["metrics"]["frobenius_sq_sum"].get<double>();
  CHECK(std::abs(fro_after - fro_before) > 1.0);
  // File output matches the stdout dump.
  CHECK(nlohmann::json::parse(slurp(demo_out)) == demo);

  // --- sweep -------------------------------------------------------------------
  const std::string sweep_cfg = tmp.file("sweep.json");
  write_text(sweep_cfg, kSweepConfig);
  const std::string csv_path = tmp.file("sweep.csv");
  const CliResult sw =
      run_cli("sweep --config '" + sweep_cfg + "' --out '" + csv_path + "'", tmp);
  CHECK(sw.exit_code == 0);
  CHECK(sw.out.find("sweep: 4 rows") != std::string::npos);
  CHECK(sw.err.find("run 0:") != std::string::npos);  // progress goes to stderr

  const std::vector<SweepRow> rows = read_sweep_csv(csv_path);
  REQUIRE(rows.size() == 4);
  CHECK(rows[0].run_id == 0);
  CHECK(rows[3].corruption_ratio == 1.0);

  // --- report --------------------------------------------------------------------
  const std::string corr_path = tmp.file("corr.json");
  const CliResult rpt =
      run_cli("report --in '" + csv_path + "' --out '" + corr_path + "'", tmp);
  CHECK(rpt.exit_code == 0);
  const nlohmann::json corr = nlohmann::json::parse(slurp(corr_path));
  CHECK(corr["rows"] == 4);
  CHECK(corr["correlations"].contains("normalized"));
  CHECK(corr["correlations"].contains("trace_sharpness"));
}

TEST_CASE("cli: machine-readable error categories reach stderr") {
  ::unsetenv("SHARPNORM_DATA");
  testutil::TempDir tmp;

  const CliResult io = run_cli(
      "measure --ckpt '" + tmp.file("nope.ckpt") + "' --out '" + tmp.file("r.json") + "'", tmp);
  CHECK(io.exit_code == 1);
  CHECK(io.err.rfind("error: io:", 0) == 0);

  const std::string bad_cfg = tmp.file("bad.json");
  write_text(bad_cfg, "{\"data\": {}}");
  const CliResult fmt =
      run_cli("train --config '" + bad_cfg + "' --out '" + tmp.file("m.ckpt") + "'", tmp);
  CHECK(fmt.exit_code == 1);
  CHECK(fmt.err.rfind("error: format:", 0) == 0);

  const std::string short_csv = tmp.file("short.csv");
  write_text(short_csv, std::string(kSweepCsvHeader) + "\n1,0,1,1,1,0,1,1,1,1,1\n");
  const CliResult refusal =
      run_cli("report --in '" + short_csv + "' --out '" + tmp.file("c.json") + "'", tmp);
  CHECK(refusal.exit_code == 1);
  CHECK(refusal.err.rfind("error: refusal:", 0) == 0);
}

TEST_CASE("cli: mnist data directory falls back to SHARPNORM_DATA") {
  ::unsetenv("SHARPNORM_DATA");
  testutil::TempDir tmp;

  // Stage a 2-sample IDX fixture as both train and test splits.
  const std::string data_dir = tmp.path();
  testutil::write_idx_fixture(data_dir, false);
  const std::vector<unsigned char> pixels = {0, 51, 102, 153, 204, 255, 25, 50};
  const std::vector<unsigned char> labels = {3, 7};
  testutil::write_bytes(tmp.file("t10k-images-idx3-ubyte"),
                        testutil::idx_image_bytes(2, 2, 2, pixels));
  testutil::write_bytes(tmp.file("t10k-labels-idx1-ubyte"),
                        testutil::idx_label_bytes(labels));

  const std::string cfg_path = tmp.file("mnist-train.json");
  write_text(cfg_path, R"({
    "net": {
      "input_shape": [1, 2, 2],
      "num_classes": 8,
      "layers": [
        {"type": "flatten"},
        {"type": "dense", "in": 4, "out": 8}
      ]
    },
    "data": {"source": "mnist"},
    "train": {"epochs": 2, "batch_size": 2, "seed": 1}
  })");

  // Without the env var and without --data the run must fail cleanly.
  const std::string ckpt = tmp.file("mnist.ckpt");
  const CliResult fail_run =
      run_cli("train --config '" + cfg_path + "' --out '" + ckpt + "'", tmp);
  CHECK(fail_run.exit_code == 1);
  CHECK(fail_run.err.rfind("error: argument:", 0) == 0);

  // With SHARPNORM_DATA exported the same invocation succeeds.
  const CliResult env_run = run_cli("train --config '" + cfg_path + "' --out '" + ckpt + "'",
                                    tmp, "SHARPNORM_DATA='" + data_dir + "' ");
  CHECK(env_run.exit_code == 0);
  const LoadedCheckpoint ck = load_checkpoint(ckpt);
  CHECK(ck.manifest["data"]["dir"] == data_dir);

  // The --data flag also works, overriding a bogus environment value.
  const CliResult flag_run =
      run_cli("train --config '" + cfg_path + "' --out '" + ckpt + "' --data '" + data_dir + "'",
              tmp, "SHARPNORM_DATA=/nonexistent ");
  CHECK(flag_run.exit_code == 0);
}

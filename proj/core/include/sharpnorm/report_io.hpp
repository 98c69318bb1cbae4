#pragma once

#include <json.hpp>
#include <span>
#include <string>
#include <vector>

namespace sharpnorm {

// Standard Pearson product-moment coefficient; needs >= 3 points and
// non-constant inputs.
double pearson(std::span<const double> x, std::span<const double> y);

// (x - min) / (max - min); refuses constant columns.
std::vector<double> minmax_rescale(std::span<const double> x);

struct SweepRow {
  int run_id = 0;
  double corruption_ratio = 0.0;
  std::uint64_t seed = 0;
  double train_acc = 0.0;
  double test_acc = 0.0;
  double gap = 0.0;
  double trace_sharpness = 0.0;
  double frobenius_sq_sum = 0.0;
  double matrix_normalized = 0.0;
  double normalized = 0.0;
  double fisher_rao = 0.0;
};

extern const char* const kSweepCsvHeader;

// Values serialized with 17 significant digits so that read(write(rows))
// reproduces every double bit-exactly.
void write_sweep_csv(const std::string& path, const std::vector<SweepRow>& rows);
std::vector<SweepRow> read_sweep_csv(const std::string& path);

// Pearson r of each metric against the accuracy gap, raw and after min-max
// rescaling of the metric column, plus the rescaled columns for plotting.
nlohmann::json correlation_report(const std::vector<SweepRow>& rows);

}  // namespace sharpnorm

#include "sharpnorm/report_io.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "sharpnorm/error.hpp"

namespace sharpnorm {

double pearson(std::span<const double> x, std::span<const double> y) {
  require(x.size() == y.size(), ErrorCategory::Dimension,
          "pearson inputs must have equal length");
  require(x.size() >= 3, ErrorCategory::Degenerate,
          "pearson needs at least 3 points, got " + std::to_string(x.size()));
  const auto n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  require(sxx > 0.0, ErrorCategory::Degenerate, "pearson: first input is constant");
  require(syy > 0.0, ErrorCategory::Degenerate, "pearson: second input is constant");
  return sxy / std::sqrt(sxx * syy);
}

std::vector<double> minmax_rescale(std::span<const double> x) {
  require(!x.empty(), ErrorCategory::Argument, "minmax_rescale on empty input");
  double lo = x[0], hi = x[0];
  for (double v : x) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  require(hi > lo, ErrorCategory::Refusal, "minmax_rescale refused: column is constant");
  std::vector<double> out;
  out.reserve(x.size());
  for (double v : x) out.push_back((v - lo) / (hi - lo));
  return out;
}

const char* const kSweepCsvHeader =
    "run_id,corruption_ratio,seed,train_acc,test_acc,gap,trace_sharpness,frobenius_sq_sum,"
    "matrix_normalized,normalized,fisher_rao";

namespace {

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& tok, int line) {
  char* end = nullptr;
  const double v = std::strtod(tok.c_str(), &end);
  require(end == tok.c_str() + tok.size() && !tok.empty(), ErrorCategory::Format,
          "bad numeric value '" + tok + "' on csv line " + std::to_string(line));
  return v;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(line);
  while (std::getline(is, cur, ',')) out.push_back(cur);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

void write_sweep_csv(const std::string& path, const std::vector<SweepRow>& rows) {
  std::ofstream out(path);
  require(out.good(), ErrorCategory::Io, "cannot open " + path + " for writing");
  out << kSweepCsvHeader << "\n";
  for (const auto& r : rows) {
    out << r.run_id << "," << fmt17(r.corruption_ratio) << "," << r.seed << ","
        << fmt17(r.train_acc) << "," << fmt17(r.test_acc) << "," << fmt17(r.gap) << ","
        << fmt17(r.trace_sharpness) << "," << fmt17(r.frobenius_sq_sum) << ","
        << fmt17(r.matrix_normalized) << "," << fmt17(r.normalized) << ","
        << fmt17(r.fisher_rao) << "\n";
  }
  require(out.good(), ErrorCategory::Io, "write failed for " + path);
}

std::vector<SweepRow> read_sweep_csv(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCategory::Io, "cannot open " + path);
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorCategory::Format, path + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  require(line == kSweepCsvHeader, ErrorCategory::Format,
          path + ": unexpected csv header '" + line + "'");

  std::vector<SweepRow> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto toks = split_csv_line(line);
    require(toks.size() == 11, ErrorCategory::Format,
            path + ": line " + std::to_string(line_no) + " has " + std::to_string(toks.size()) +
                " columns, expected 11");
    SweepRow r;
    r.run_id = static_cast<int>(parse_double(toks[0], line_no));
    r.corruption_ratio = parse_double(toks[1], line_no);
    r.seed = static_cast<std::uint64_t>(std::strtoull(toks[2].c_str(), nullptr, 10));
    r.train_acc = parse_double(toks[3], line_no);
    r.test_acc = parse_double(toks[4], line_no);
    r.gap = parse_double(toks[5], line_no);
    r.trace_sharpness = parse_double(toks[6], line_no);
    r.frobenius_sq_sum = parse_double(toks[7], line_no);
    r.matrix_normalized = parse_double(toks[8], line_no);
    r.normalized = parse_double(toks[9], line_no);
    r.fisher_rao = parse_double(toks[10], line_no);
    rows.push_back(r);
  }
  return rows;
}

nlohmann::json correlation_report(const std::vector<SweepRow>& rows) {
  require(rows.size() >= 3, ErrorCategory::Refusal,
          "correlation needs at least 3 sweep rows, got " + std::to_string(rows.size()));

  std::vector<double> gap;
  gap.reserve(rows.size());
  for (const auto& r : rows) gap.push_back(r.gap);

  const std::vector<std::pair<std::string, double SweepRow::*>> metrics = {
      {"trace_sharpness", &SweepRow::trace_sharpness},
      {"frobenius_sq_sum", &SweepRow::frobenius_sq_sum},
      {"matrix_normalized", &SweepRow::matrix_normalized},
      {"normalized", &SweepRow::normalized},
      {"fisher_rao", &SweepRow::fisher_rao},
  };

  nlohmann::json j;
  j["rows"] = rows.size();
  j["correlations"] = nlohmann::json::object();
  j["rescaled_columns"] = nlohmann::json::object();
  for (const auto& [name, member] : metrics) {
    std::vector<double> col;
    col.reserve(rows.size());
    for (const auto& r : rows) col.push_back(r.*member);
    nlohmann::json entry;
    try {
      entry["pearson_vs_gap"] = pearson(col, gap);
      const std::vector<double> rescaled = minmax_rescale(col);
      entry["pearson_vs_gap_rescaled"] = pearson(rescaled, gap);
      j["rescaled_columns"][name] = rescaled;
    } catch (const Error& e) {
      entry["pearson_vs_gap"] = nullptr;
      entry["skipped"] = std::string(to_string(e.category())) + ": " + e.what();
    }
    j["correlations"][name] = std::move(entry);
  }
  return j;
}

}  // namespace sharpnorm

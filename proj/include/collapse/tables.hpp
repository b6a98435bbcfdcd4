#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "collapse/config.hpp"
#include "collapse/harness.hpp"

namespace collapse {

// |bias| above this is flagged, as in the published tables.
inline constexpr double kBiasFlag = 0.1;

// One parsed CSV data line. Methods without a summary carry NaN values.
struct TableRow {
  std::string scenario;
  std::string outcome;
  std::string method;
  std::size_t n_reps = 0;
  std::size_t n_failed = 0;
  double truth = 0.0;
  double mean = 0.0;
  double mcse_mean = 0.0;
  double emp_se = 0.0;
  double mcse_emp_se = 0.0;
  double bias = 0.0;
  bool flagged = false;
};

// Point estimates, SEs and bias to 3 decimals; Monte Carlo errors to 4.
std::string render_csv(const std::vector<ScenarioResult>& results);
std::string render_markdown(const std::vector<ScenarioResult>& results);
std::vector<TableRow> parse_results_csv(const std::string& text);

// Writes results.csv and/or results.md into config.out_dir and returns the
// paths written. Throws ErrorKind::Io when the directory is unwritable.
std::vector<std::filesystem::path> emit_tables(const std::vector<ScenarioResult>& results,
                                               const RunConfig& config);

}  // namespace collapse

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "collapse/synth.hpp"

namespace collapse {

enum class OutcomeSelection { Binary, TTE, Both };
enum class TableFormat { Csv, Markdown, Both };

struct RunConfig {
  // Registered labels, or exactly one of "all", "all-ss", "all-itc".
  std::vector<std::string> scenarios{"all"};
  OutcomeSelection outcome = OutcomeSelection::Both;
  std::size_t nsim = 10000;
  std::size_t n = 0;  // 0: 2000 for single studies, 1000 per ITC study
  std::uint64_t seed = 1;
  std::size_t truth_mc_size = 1000000;
  std::uint64_t truth_seed = 1;
  std::size_t workers = 1;
  std::filesystem::path out_dir = "results";
  TableFormat format = TableFormat::Both;
  bool dump_estimates = false;
  std::filesystem::path truth_cache;  // empty: <out_dir>/truth_cache.tsv
  bool quiet = false;

  // Scenario specs in label order, binary before survival for each label.
  std::vector<ScenarioSpec> resolve_scenarios() const;
  std::filesystem::path truth_cache_path() const;
};

// Thrown by parse_config for --help; carries the rendered help text.
struct HelpRequested : std::runtime_error {
  explicit HelpRequested(const std::string& text) : std::runtime_error(text) {}
};

// Command-line flags override values from an optional key=value file given by
// --config, which override the defaults. The worker default comes from
// COLLAPSE_LAB_WORKERS when set. Errors are reported as ErrorKind::Usage.
RunConfig parse_config(const std::vector<std::string>& args);
RunConfig parse_config(int argc, const char* const* argv);

}  // namespace collapse

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "collapse/estimators.hpp"
#include "collapse/synth.hpp"

namespace collapse {

struct PerfSummary {
  MethodId method;
  std::size_t n_reps = 0;    // usable (non-failed) replications
  std::size_t n_failed = 0;
  double mean = 0.0;
  double mcse_mean = 0.0;
  double emp_se = 0.0;
  double mcse_emp_se = 0.0;
  double truth = 0.0;
  double bias = 0.0;
};

// Failed estimates are counted and excluded. Throws InsufficientReplications
// when fewer than two usable estimates remain.
PerfSummary summarize(std::span<const Estimate> estimates, double truth);

using Replication = std::array<Estimate, 5>;

inline constexpr std::size_t kDefaultSingleN = 2000;
inline constexpr std::size_t kDefaultItcN = 1000;

struct RunOptions {
  std::size_t n = 0;  // 0 selects the design default
  std::size_t nsim = 1000;
  std::uint64_t seed = 1;
  std::size_t workers = 1;
  std::size_t pool_size = kDefaultPoolSize;
  EstimatorOptions estimator;
  // Every replication reuses the streams of replication 0.
  bool common_stream = false;
  std::function<void(std::size_t done, std::size_t total)> progress;
};

// Generates one dataset (or ITC pair) and applies the five methods.
Replication run_replication(const ScenarioSpec& spec, std::size_t n, const StreamKey& key,
                            const RunOptions& options);

struct ScenarioResult {
  ScenarioSpec spec;
  double truth = 0.0;
  std::vector<Replication> replications;  // in replication order
  std::vector<PerfSummary> summaries;     // one per method with >= 2 usable estimates
  std::size_t m_capped = 0;               // standardizations that hit the m cap
  bool complete = false;                  // every method summarized
  std::vector<std::string> problems;
};

// Replications run on `options.workers` threads and are folded in index
// order, so results do not depend on the worker count.
ScenarioResult run_scenario(const ScenarioSpec& spec, double truth, const RunOptions& options);

// Plain-text truth store: one tab-separated record per line
// (label, outcome, mc_size, seed, value), sorted by key.
class TruthCache {
 public:
  TruthCache() = default;
  explicit TruthCache(std::filesystem::path path);

  double get_or_compute(const ScenarioSpec& spec, std::size_t mc_size, std::uint64_t seed);
  bool contains(const ScenarioSpec& spec, std::size_t mc_size, std::uint64_t seed) const;
  void save() const;
  std::size_t size() const { return values_.size(); }

 private:
  using Key = std::tuple<std::string, std::string, std::size_t, std::uint64_t>;

  std::filesystem::path path_;
  std::map<Key, double> values_;
  mutable std::mutex mutex_;
};

// Replication-level dump: scenario, outcome, replication, method, value,
// failed, m_used, m_capped, reason.
void write_estimates_csv(const std::filesystem::path& path, const std::vector<ScenarioResult>& results);

struct DumpedEstimate {
  std::string scenario;
  std::string outcome;
  std::size_t replication = 0;
  Estimate estimate;
};

std::vector<DumpedEstimate> read_estimates_csv(const std::filesystem::path& path);

}  // namespace collapse

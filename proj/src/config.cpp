#include "collapse/config.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdlib>
#include <map>
#include <set>

#include "collapse/error.hpp"

namespace collapse {

namespace {

bool is_group(const std::string& s) { return s == "all" || s == "all-ss" || s == "all-itc"; }

std::size_t default_workers() {
  const char* env = std::getenv("COLLAPSE_LAB_WORKERS");
  if (env == nullptr || *env == '\0') return 1;
  try {
    std::size_t pos = 0;
    const long long v = std::stoll(env, &pos);
    if (pos != std::string(env).size() || v < 1) throw std::invalid_argument(env);
    return static_cast<std::size_t>(v);
  } catch (const std::exception&) {
    throw Error(ErrorKind::Usage, "COLLAPSE_LAB_WORKERS must be a positive integer");
  }
}

void validate(RunConfig& c) {
  if (c.scenarios.empty()) throw Error(ErrorKind::Usage, "no scenarios requested");
  const bool any_group = std::any_of(c.scenarios.begin(), c.scenarios.end(), is_group);
  if (any_group && c.scenarios.size() > 1)
    throw Error(ErrorKind::Usage, "scenario groups cannot be combined with other entries");
  std::set<std::string> seen;
  for (const auto& s : c.scenarios) {
    if (!is_group(s) && !is_registered_label(s))
      throw Error(ErrorKind::Usage, "unknown scenario '" + s + "'");
    if (!seen.insert(s).second) throw Error(ErrorKind::Usage, "scenario '" + s + "' listed twice");
  }
  if (c.nsim < 2) throw Error(ErrorKind::Usage, "nsim must be at least 2");
  if (c.n == 1) throw Error(ErrorKind::Usage, "n must be at least 2");
  if (c.truth_mc_size < 2) throw Error(ErrorKind::Usage, "truth_mc_size must be at least 2");
  if (c.workers < 1) throw Error(ErrorKind::Usage, "workers must be at least 1");
}

}  // namespace

std::vector<ScenarioSpec> RunConfig::resolve_scenarios() const {
  std::vector<std::string> labels;
  for (const auto& s : scenarios) {
    if (s == "all" || s == "all-ss")
      for (auto& l : registered_labels(Design::SingleStudy)) labels.push_back(l);
    if (s == "all" || s == "all-itc")
      for (auto& l : registered_labels(Design::ITC)) labels.push_back(l);
    if (!is_group(s)) labels.push_back(s);
  }
  std::vector<ScenarioSpec> out;
  for (const auto& label : labels) {
    if (outcome != OutcomeSelection::TTE) out.push_back(registered_scenario(label, OutcomeKind::Binary));
    if (outcome != OutcomeSelection::Binary) out.push_back(registered_scenario(label, OutcomeKind::TTE));
  }
  return out;
}

std::filesystem::path RunConfig::truth_cache_path() const {
  return truth_cache.empty() ? out_dir / "truth_cache.tsv" : truth_cache;
}

RunConfig parse_config(const std::vector<std::string>& args) {
  RunConfig c;
  c.workers = default_workers();

  CLI::App app{"Simulation study of marginal odds and hazard ratio estimators", "collapse_lab"};
  app.set_config("--config", "", "key=value file; command-line flags take precedence");
  app.allow_config_extras(CLI::config_extras_mode::error);

  const std::map<std::string, OutcomeSelection> outcomes{
      {"binary", OutcomeSelection::Binary}, {"tte", OutcomeSelection::TTE}, {"both", OutcomeSelection::Both}};
  const std::map<std::string, TableFormat> formats{
      {"csv", TableFormat::Csv}, {"markdown", TableFormat::Markdown}, {"both", TableFormat::Both}};

  app.add_option("--scenarios", c.scenarios, "labels such as SS-2A,ITC-4B, or all / all-ss / all-itc")
      ->delimiter(',');
  app.add_option("--outcome", c.outcome, "binary, tte or both")
      ->transform(CLI::CheckedTransformer(outcomes, CLI::ignore_case));
  app.add_option("--nsim", c.nsim, "replications per scenario");
  app.add_option("--n", c.n, "subjects per study (0: 2000 single, 1000 per ITC study)");
  app.add_option("--seed", c.seed, "replication seed");
  app.add_option("--truth-mc-size,--truth_mc_size", c.truth_mc_size, "simulated subjects for true values");
  app.add_option("--truth-seed,--truth_seed", c.truth_seed, "seed for true values");
  app.add_option("--workers", c.workers, "worker threads (default COLLAPSE_LAB_WORKERS or 1)");
  app.add_option("--out-dir,--out_dir", c.out_dir, "output directory");
  app.add_option("--format", c.format, "csv, markdown or both")
      ->transform(CLI::CheckedTransformer(formats, CLI::ignore_case));
  app.add_flag("--dump-estimates,--dump_estimates", c.dump_estimates, "write replication-level estimates");
  app.add_option("--truth-cache,--truth_cache", c.truth_cache, "truth cache file");
  app.add_flag("--quiet", c.quiet, "no progress output");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    throw HelpRequested(app.help());
  } catch (const CLI::ParseError& e) {
    throw Error(ErrorKind::Usage, e.what());
  }
  validate(c);
  return c;
}

RunConfig parse_config(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return parse_config(args);
}

}  // namespace collapse

#include <catch_amalgamated.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include "collapse/config.hpp"
#include "collapse/error.hpp"
#include "collapse/tables.hpp"

using namespace collapse;
using Catch::Matchers::WithinAbs;

namespace {

std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "collapse_lab_cli_tests" / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

ErrorKind usage_kind(const std::vector<std::string>& args) {
  try {
    parse_config(args);
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("no error raised");
  return ErrorKind::Io;
}

ScenarioResult fake_result(const char* label, OutcomeKind outcome, double truth, double mean) {
  ScenarioResult r;
  r.spec = registered_scenario(label, outcome);
  r.truth = truth;
  r.complete = true;
  const Setting setting = r.spec.design == Design::SingleStudy ? Setting::Single : Setting::ITC;
  for (std::size_t j = 0; j < kAllMethods.size(); ++j) {
    PerfSummary s;
    s.method = {setting, kAllMethods[j]};
    s.n_reps = 1000 - j;
    s.n_failed = j;
    s.truth = truth;
    s.mean = mean + 0.01 * j;
    s.emp_se = 0.1234;
    s.mcse_mean = 0.0039;
    s.mcse_emp_se = 0.00276;
    s.bias = s.mean - truth;
    r.summaries.push_back(s);
  }
  return r;
}

int exit_code(const std::string& args) {
  const std::string cmd = std::string(COLLAPSE_LAB_BINARY) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("defaults and flags", "[cli]") {
  unsetenv("COLLAPSE_LAB_WORKERS");
  const auto d = parse_config(std::vector<std::string>{});
  CHECK(d.nsim == 10000);
  CHECK(d.seed == 1);
  CHECK(d.truth_mc_size == 1000000);
  CHECK(d.workers == 1);
  CHECK(d.scenarios == std::vector<std::string>{"all"});
  CHECK(d.resolve_scenarios().size() == 32);
  CHECK(d.truth_cache_path() == std::filesystem::path("results") / "truth_cache.tsv");

  const auto c = parse_config(std::vector<std::string>{"--scenarios", "SS-2A,ITC-4B", "--outcome", "tte",
                                                       "--nsim", "50", "--seed", "9", "--format", "csv",
                                                       "--dump-estimates", "--quiet"});
  CHECK(c.nsim == 50);
  CHECK(c.seed == 9);
  CHECK(c.outcome == OutcomeSelection::TTE);
  CHECK(c.format == TableFormat::Csv);
  CHECK(c.dump_estimates);
  CHECK(c.quiet);
  const auto specs = c.resolve_scenarios();
  REQUIRE(specs.size() == 2);
  CHECK(specs[0].label == "SS-2A");
  CHECK(specs[1].label == "ITC-4B");
  CHECK(specs[1].outcome == OutcomeKind::TTE);

  const auto ss = parse_config(std::vector<std::string>{"--scenarios", "all-itc", "--outcome", "binary"});
  CHECK(ss.resolve_scenarios().size() == 8);
  const auto both = parse_config(std::vector<std::string>{"--scenarios", "SS-3B"}).resolve_scenarios();
  REQUIRE(both.size() == 2);
  CHECK(both[0].outcome == OutcomeKind::Binary);
  CHECK(both[1].outcome == OutcomeKind::TTE);
}

TEST_CASE("config file values yield to flags", "[cli]") {
  const auto dir = scratch_dir("file");
  const auto file = dir / "run.ini";
  std::ofstream(file) << "nsim=500\nseed=4\nscenarios=SS-1A\n";
  const auto from_file = parse_config(std::vector<std::string>{"--config", file.string()});
  CHECK(from_file.nsim == 500);
  CHECK(from_file.seed == 4);
  CHECK(from_file.scenarios == std::vector<std::string>{"SS-1A"});
  const auto overridden = parse_config(std::vector<std::string>{"--config", file.string(), "--nsim", "1000"});
  CHECK(overridden.nsim == 1000);
  CHECK(overridden.seed == 4);

  const auto bad = dir / "bad.ini";
  std::ofstream(bad) << "replications=3\n";
  CHECK(usage_kind({"--config", bad.string()}) == ErrorKind::Usage);
}

TEST_CASE("usage errors", "[cli]") {
  CHECK(usage_kind({"--scenarios", "SS-9Z"}) == ErrorKind::Usage);
  CHECK(usage_kind({"--nsim", "ten"}) == ErrorKind::Usage);
  CHECK(usage_kind({"--nsim", "1"}) == ErrorKind::Usage);
  CHECK(usage_kind({"--outcome", "count"}) == ErrorKind::Usage);
  CHECK(usage_kind({"--scenarios", "all,SS-1A"}) == ErrorKind::Usage);
  CHECK(usage_kind({"--scenarios", "all-ss,all-itc"}) == ErrorKind::Usage);
  CHECK(usage_kind({"--scenarios", "SS-1A,SS-1A"}) == ErrorKind::Usage);
  CHECK(usage_kind({"--frobnicate"}) == ErrorKind::Usage);
  CHECK(usage_kind({"--workers", "0"}) == ErrorKind::Usage);
}

TEST_CASE("worker default from the environment", "[cli]") {
  setenv("COLLAPSE_LAB_WORKERS", "6", 1);
  CHECK(parse_config(std::vector<std::string>{}).workers == 6);
  CHECK(parse_config(std::vector<std::string>{"--workers", "2"}).workers == 2);
  setenv("COLLAPSE_LAB_WORKERS", "lots", 1);
  CHECK(usage_kind({}) == ErrorKind::Usage);
  unsetenv("COLLAPSE_LAB_WORKERS");
}

TEST_CASE("help", "[cli]") {
  try {
    parse_config(std::vector<std::string>{"--help"});
    FAIL("expected help");
  } catch (const HelpRequested& h) {
    const std::string text = h.what();
    CHECK(text.find("--nsim") != std::string::npos);
    CHECK(text.find("--scenarios") != std::string::npos);
  }
}

TEST_CASE("result tables", "[cli]") {
  std::vector<ScenarioResult> results{fake_result("SS-2A", OutcomeKind::Binary, 0.768, 0.918),
                                      fake_result("ITC-4B", OutcomeKind::TTE, 1.140, 1.150)};
  const std::string csv = render_csv(results);
  std::istringstream lines(csv);
  std::string header;
  std::getline(lines, header);
  CHECK(std::count(header.begin(), header.end(), ',') == 11);

  const auto rows = parse_results_csv(csv);
  REQUIRE(rows.size() == 10);
  CHECK(rows[0].scenario == "SS-2A");
  CHECK(rows[0].method == "A1");
  CHECK_THAT(rows[0].bias, WithinAbs(0.150, 1e-12));
  CHECK(rows[0].flagged);
  CHECK(rows[0].n_reps == 1000);
  CHECK(rows[4].n_failed == 4);
  CHECK_THAT(rows[0].mcse_mean, WithinAbs(0.0039, 1e-12));
  CHECK_THAT(rows[0].emp_se, WithinAbs(0.123, 1e-12));
  CHECK_THAT(rows[0].mcse_emp_se, WithinAbs(0.0028, 1e-12));
  CHECK_FALSE(rows[5].flagged);
  CHECK(rows[9].outcome == "tte");

  const std::string md = render_markdown(results);
  CHECK(md.find("**0.918 (0.0039) 0.123 (0.0028)**") != std::string::npos);
  CHECK(md.find("1.150 (0.0039) 0.123 (0.0028)") != std::string::npos);
  CHECK(md.find("A1. Bucher") != std::string::npos);
  CHECK(md.find("A3. PSW (quad.)") != std::string::npos);

  CHECK_THROWS_AS(parse_results_csv("not,a,header\n"), Error);
}

TEST_CASE("emitting tables", "[cli]") {
  std::vector<ScenarioResult> results{fake_result("SS-1A", OutcomeKind::TTE, 1.0, 1.0)};
  RunConfig c;
  c.out_dir = scratch_dir("emit");
  c.format = TableFormat::Both;
  const auto written = emit_tables(results, c);
  REQUIRE(written.size() == 2);
  for (const auto& p : written) CHECK(std::filesystem::exists(p));
  c.format = TableFormat::Csv;
  c.out_dir /= "csv_only";
  CHECK(emit_tables(results, c).size() == 1);

  const auto blocker = scratch_dir("blocked") / "file";
  std::ofstream(blocker) << "x";
  c.out_dir = blocker / "sub";
  try {
    emit_tables(results, c);
    FAIL("expected an I/O error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Io);
  }
}

TEST_CASE("command-line exit codes", "[cli]") {
  CHECK(exit_code("--help") == 0);
  CHECK(exit_code("--scenarios SS-9Z") == 2);
  CHECK(exit_code("--nsim") == 2);
  const auto out = scratch_dir("run");
  CHECK(exit_code("--scenarios SS-2A --outcome binary --nsim 3 --n 300 --truth-mc-size 20000 --quiet "
                  "--dump-estimates --out-dir " +
                  out.string()) == 0);
  CHECK(std::filesystem::exists(out / "results.csv"));
  CHECK(std::filesystem::exists(out / "results.md"));
  CHECK(std::filesystem::exists(out / "estimates.csv"));
  CHECK(std::filesystem::exists(out / "truth_cache.tsv"));
}

#include <cstdio>
#include <iostream>

#include "collapse/config.hpp"
#include "collapse/error.hpp"
#include "collapse/harness.hpp"
#include "collapse/tables.hpp"

using namespace collapse;

int main(int argc, char** argv) {
  RunConfig config;
  try {
    config = parse_config(argc, argv);
  } catch (const HelpRequested& h) {
    std::cout << h.what();
    return 0;
  } catch (const Error& e) {
    std::cerr << "collapse_lab: " << e.what() << "\nRun with --help for usage.\n";
    return 2;
  }

  bool all_complete = true;
  try {
    TruthCache truths(config.truth_cache_path());
    std::vector<ScenarioResult> results;
    for (const ScenarioSpec& spec : config.resolve_scenarios()) {
      const std::string name = spec.label + " " + std::string(to_string(spec.outcome));
      if (!config.quiet) std::cerr << name << ": true value..." << std::flush;
      const double truth = truths.get_or_compute(spec, config.truth_mc_size, config.truth_seed);
      truths.save();
      if (!config.quiet) std::cerr << " " << truth << '\n';

      RunOptions options;
      options.n = config.n;
      options.nsim = config.nsim;
      options.seed = config.seed;
      options.workers = config.workers;
      if (!config.quiet) {
        options.progress = [&](std::size_t done, std::size_t total) {
          if (done % 50 == 0 || done == total)
            std::cerr << "\r" << name << ": " << done << "/" << total << std::flush;
        };
      }
      ScenarioResult r = run_scenario(spec, truth, options);
      if (!config.quiet) std::cerr << '\n';
      if (r.m_capped > 0)
        std::cerr << name << ": warning: " << r.m_capped
                  << " survival standardizations reached the m cap without stabilizing\n";
      for (const auto& p : r.problems) std::cerr << name << ": " << p << '\n';
      all_complete = all_complete && r.complete;
      results.push_back(std::move(r));
    }

    for (const auto& path : emit_tables(results, config)) std::cerr << "wrote " << path.string() << '\n';
    if (config.dump_estimates) {
      const auto path = config.out_dir / "estimates.csv";
      write_estimates_csv(path, results);
      std::cerr << "wrote " << path.string() << '\n';
    }
  } catch (const Error& e) {
    std::cerr << "collapse_lab: " << e.what() << '\n';
    return 1;
  }
  return all_complete ? 0 : 1;
}

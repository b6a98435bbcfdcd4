#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>

#include "collapse/synth.hpp"

namespace collapse {

enum class TruthMethod { Simulation, Quadrature };

struct TruthResult {
  double value = 0.0;
  std::size_t mc_size = 0;   // simulated subjects; quadrature nodes for Quadrature
  double mc_se_hint = 0.0;   // approximate Monte Carlo SE; 0 for Quadrature
  TruthMethod method = TruthMethod::Simulation;
};

inline constexpr std::size_t kDefaultTruthSize = 1000000;
inline constexpr std::size_t kQuadratureNodes = 256;

// The target covariate law (untreated subjects for a single study, the
// study-2 population for an ITC) has density proportional to
// phi(l; 0, 1.5) * (1 - expit(kappa1 l + kappa2 l^2)).
double target_acceptance(const ScenarioSpec& spec, double l);

// Draws from the target law by rejection from the pooled normal.
double draw_target_covariate(const ScenarioSpec& spec, Stream& rng);

// Marginal log odds ratio from mc_size simulated target-law covariates; the
// predicted risks are averaged, so the only noise is the covariate sample.
TruthResult true_marginal_logor(const ScenarioSpec& spec, std::size_t mc_size, std::uint64_t seed);

// Same estimand by Gauss-Hermite quadrature against the tilted normal density.
TruthResult true_marginal_logor_quadrature(const ScenarioSpec& spec);

// Treatment-only Cox coefficient of a simulated 1:1 randomized trial in the
// target population, with the usual entry and administrative censoring.
TruthResult true_marginal_loghr(const ScenarioSpec& spec, std::size_t mc_size, std::uint64_t seed);

// Dispatches on spec.outcome to the simulation-based truth.
TruthResult true_marginal_effect(const ScenarioSpec& spec, std::size_t mc_size, std::uint64_t seed);

// Stable 64-bit key for a scenario label, used to derive truth streams.
std::uint64_t label_key(std::string_view label);

}  // namespace collapse

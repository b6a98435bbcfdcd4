#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "collapse/fit.hpp"
#include "collapse/rng.hpp"
#include "collapse/synth.hpp"

namespace collapse {

enum class TargetKind { EmpiricalUntreated, EmpiricalAll, PseudoNormal };

// Covariate distribution over which a conditional model is averaged.
struct TargetPopulation {
  TargetKind kind = TargetKind::EmpiricalAll;
  std::vector<double> draws;
  double mu = 0.0;  // PseudoNormal only
  double sd = 0.0;  // PseudoNormal only

  static TargetPopulation empirical_untreated(const ObsDataset& data);
  static TargetPopulation empirical_all(const ObsDataset& data);
  static TargetPopulation pseudo_normal(double mu, double sd, std::size_t w, Stream& rng);
  static TargetPopulation from_draws(std::vector<double> draws);
};

// Marginal log odds ratio: logit of the averaged predicted risks under x = 1
// minus the same under x = 0.
double standardize_binary(const FitLogistic& fit, const TargetPopulation& target);

// Right-continuous step function equal to 1 before times.front().
struct StepCurve {
  std::vector<double> times;
  std::vector<double> values;

  double at(double t) const;
};

struct MarginalCurves {
  StepCurve treated;
  StepCurve untreated;
};

MarginalCurves marginal_survival_curves(const FitCox& fit, const TargetPopulation& target);

struct SimulatedRecords {
  std::vector<double> time;
  std::vector<int> event;

  std::size_t size() const { return time.size(); }
};

// Discrete inverse-transform draws: the event time is the first grid time
// whose survival is at or below u; draws with u below the final plateau are
// censored at the horizon.
SimulatedRecords simulate_marginal_arm(const StepCurve& curve, std::size_t m, double horizon,
                                       Stream& rng);

// Reverse Kaplan-Meier estimate of the censoring distribution of a source
// study. Inactive unless both source arms contain censored subjects.
class CensoringModel {
 public:
  explicit CensoringModel(const ObsDataset& source);

  bool active() const { return active_; }
  // Survival function of the censoring time, P(C > t).
  const StepCurve& survival() const { return survival_; }
  // Censoring time drawn by inverse transform; +infinity past the last
  // observed censoring time.
  double draw(Stream& rng) const;

 private:
  bool active_ = false;
  StepCurve survival_;
};

// Draws an independent censoring time per record; records whose censoring
// time precedes their event or horizon time become censored at that time.
void apply_censoring(SimulatedRecords& records, const CensoringModel& model, Stream& rng);

inline constexpr double kHorizon = kStudyEnd;

// The marginal curves and censoring model are computed once; run() then
// simulates 2m records and returns the univariate Cox coefficient.
class SurvivalStandardizer {
 public:
  SurvivalStandardizer(const FitCox& fit, const TargetPopulation& target, const ObsDataset& source);

  double run(std::size_t m, Stream& rng) const;
  const MarginalCurves& curves() const { return curves_; }
  const CensoringModel& censoring() const { return censoring_; }

 private:
  MarginalCurves curves_;
  CensoringModel censoring_;
};

double standardize_survival(const FitCox& fit, const TargetPopulation& target,
                            const ObsDataset& source, std::size_t m, Stream& rng);

struct AdaptiveMControl {
  std::size_t m_start = 20000;
  std::size_t m_cap = 100000;
  double growth = 1.1;
  double tolerance = 0.009;
};

struct AdaptiveMResult {
  double value = 0.0;
  std::size_t m_used = 0;
  bool capped = false;
};

// Re-evaluates at ceil(growth * m) until two consecutive estimates agree
// within the tolerance; returns the earlier of the agreeing pair.
AdaptiveMResult adaptive_m(const std::function<double(std::size_t)>& runner,
                           const AdaptiveMControl& control = {});

}  // namespace collapse

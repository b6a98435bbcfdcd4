#include "collapse/standardize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <tuple>

#include "collapse/error.hpp"
#include "mixture.hpp"

namespace collapse {

namespace {

// Averages exp(-cumhaz_k * r_j) over j for every grid point k.
std::vector<double> mixture_survival(std::span<const double> cumhaz, std::span<const double> risk) {
  std::vector<double> acc(cumhaz.size(), 0.0);
  const std::size_t k = cumhaz.size();
  detail::accumulate_mixture(cumhaz.data(), k, risk.data(), risk.size(), acc.data());
  const double inv = 1.0 / static_cast<double>(risk.size());
  for (double& v : acc) v = std::min(1.0, v * inv);
  // Guard against rounding producing a tiny increase between grid points.
  for (std::size_t i = 1; i < k; ++i) acc[i] = std::min(acc[i], acc[i - 1]);
  return acc;
}

}  // namespace

TargetPopulation TargetPopulation::empirical_untreated(const ObsDataset& data) {
  TargetPopulation t;
  t.kind = TargetKind::EmpiricalUntreated;
  for (std::size_t i = 0; i < data.size(); ++i)
    if (data.x()[i] == 0) t.draws.push_back(data.l()[i]);
  if (t.draws.empty()) throw Error(ErrorKind::EstimationFailure, "no untreated subjects");
  return t;
}

TargetPopulation TargetPopulation::empirical_all(const ObsDataset& data) {
  if (data.empty()) throw Error(ErrorKind::InvalidArgument, "empty dataset");
  TargetPopulation t;
  t.kind = TargetKind::EmpiricalAll;
  t.draws.assign(data.l().begin(), data.l().end());
  return t;
}

TargetPopulation TargetPopulation::pseudo_normal(double mu, double sd, std::size_t w, Stream& rng) {
  if (!(sd > 0.0)) throw Error(ErrorKind::InvalidArgument, "pseudo-population sd must be positive");
  if (w == 0) throw Error(ErrorKind::InvalidArgument, "pseudo-population size must be positive");
  TargetPopulation t;
  t.kind = TargetKind::PseudoNormal;
  t.mu = mu;
  t.sd = sd;
  t.draws.resize(w);
  for (double& v : t.draws) v = rng.normal(mu, sd);
  return t;
}

TargetPopulation TargetPopulation::from_draws(std::vector<double> draws) {
  if (draws.empty()) throw Error(ErrorKind::InvalidArgument, "empty target population");
  TargetPopulation t;
  t.kind = TargetKind::EmpiricalAll;
  t.draws = std::move(draws);
  return t;
}

double standardize_binary(const FitLogistic& fit, const TargetPopulation& target) {
  if (!fit.converged) throw Error(ErrorKind::InvalidArgument, "fit did not converge");
  if (target.draws.empty()) throw Error(ErrorKind::InvalidArgument, "empty target population");
  double p1 = 0.0, p0 = 0.0;
  for (double l : target.draws) {
    p1 += expit(linear_predictor(fit, 1, l));
    p0 += expit(linear_predictor(fit, 0, l));
  }
  const double n = static_cast<double>(target.draws.size());
  p1 /= n;
  p0 /= n;
  if (!(p1 > 0.0 && p1 < 1.0 && p0 > 0.0 && p0 < 1.0))
    throw Error(ErrorKind::DegenerateMarginal, "marginal risk is 0 or 1");
  return logit(p1) - logit(p0);
}

double StepCurve::at(double t) const {
  const auto it = std::upper_bound(times.begin(), times.end(), t);
  if (it == times.begin()) return 1.0;
  return values[static_cast<std::size_t>(it - times.begin()) - 1];
}

MarginalCurves marginal_survival_curves(const FitCox& fit, const TargetPopulation& target) {
  if (!fit.converged || fit.baseline_times.empty())
    throw Error(ErrorKind::InvalidArgument, "Cox fit must be converged with a nonempty baseline");
  if (target.draws.empty()) throw Error(ErrorKind::InvalidArgument, "empty target population");
  MarginalCurves out;
  std::vector<double> risk(target.draws.size());
  for (int x : {1, 0}) {
    for (std::size_t j = 0; j < risk.size(); ++j)
      risk[j] = std::exp(linear_predictor(fit, x, target.draws[j]));
    StepCurve& c = x == 1 ? out.treated : out.untreated;
    c.times = fit.baseline_times;
    c.values = mixture_survival(fit.baseline_cumhaz, risk);
  }
  return out;
}

SimulatedRecords simulate_marginal_arm(const StepCurve& curve, std::size_t m, double horizon,
                                       Stream& rng) {
  if (curve.times.empty() || curve.times.size() != curve.values.size())
    throw Error(ErrorKind::InvalidArgument, "invalid survival curve");
  SimulatedRecords out;
  out.time.resize(m);
  out.event.resize(m);
  const auto& v = curve.values;
  for (std::size_t i = 0; i < m; ++i) {
    const double u = rng.uniform();
    const auto it = std::partition_point(v.begin(), v.end(), [u](double s) { return s > u; });
    if (it == v.end()) {
      out.time[i] = horizon;
      out.event[i] = 0;
    } else {
      out.time[i] = curve.times[static_cast<std::size_t>(it - v.begin())];
      out.event[i] = 1;
    }
  }
  return out;
}

CensoringModel::CensoringModel(const ObsDataset& source) {
  if (source.kind() != OutcomeKind::TTE)
    throw Error(ErrorKind::InvalidArgument, "censoring model needs survival data");
  bool censored_arm[2] = {false, false};
  for (std::size_t i = 0; i < source.size(); ++i)
    if (source.event()[i] == 0) censored_arm[source.x()[i] ? 1 : 0] = true;
  active_ = censored_arm[0] && censored_arm[1];
  if (!active_) return;

  // Reverse Kaplan-Meier: censorings play the role of events.
  std::vector<std::pair<double, int>> rows(source.size());
  for (std::size_t i = 0; i < source.size(); ++i) rows[i] = {source.time()[i], source.event()[i]};
  std::sort(rows.begin(), rows.end());
  double g = 1.0;
  std::size_t at_risk = rows.size();
  for (std::size_t i = 0; i < rows.size();) {
    std::size_t j = i, d = 0;
    while (j < rows.size() && rows[j].first == rows[i].first) {
      if (rows[j].second == 0) ++d;
      ++j;
    }
    if (d > 0) {
      g *= 1.0 - static_cast<double>(d) / static_cast<double>(at_risk);
      survival_.times.push_back(rows[i].first);
      survival_.values.push_back(g);
    }
    at_risk -= j - i;
    i = j;
  }
}

double CensoringModel::draw(Stream& rng) const {
  const double u = rng.uniform();
  const auto& v = survival_.values;
  const auto it = std::partition_point(v.begin(), v.end(), [u](double s) { return s > u; });
  if (it == v.end()) return std::numeric_limits<double>::infinity();
  return survival_.times[static_cast<std::size_t>(it - v.begin())];
}

void apply_censoring(SimulatedRecords& records, const CensoringModel& model, Stream& rng) {
  if (!model.active()) return;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const double c = model.draw(rng);
    if (c < records.time[i]) {
      records.time[i] = c;
      records.event[i] = 0;
    }
  }
}

SurvivalStandardizer::SurvivalStandardizer(const FitCox& fit, const TargetPopulation& target,
                                           const ObsDataset& source)
    : curves_(marginal_survival_curves(fit, target)), censoring_(source) {}

double SurvivalStandardizer::run(std::size_t m, Stream& rng) const {
  if (m == 0) throw Error(ErrorKind::InvalidArgument, "m must be positive");
  SimulatedRecords arm1 = simulate_marginal_arm(curves_.treated, m, kHorizon, rng);
  SimulatedRecords arm0 = simulate_marginal_arm(curves_.untreated, m, kHorizon, rng);
  apply_censoring(arm1, censoring_, rng);
  apply_censoring(arm0, censoring_, rng);

  // Simulated times live on a finite grid, so identical records are collapsed
  // into one row carrying its multiplicity as a weight.
  std::vector<std::tuple<double, int, int>> rows;
  rows.reserve(2 * m);
  for (std::size_t i = 0; i < m; ++i) rows.emplace_back(arm1.time[i], arm1.event[i], 1);
  for (std::size_t i = 0; i < m; ++i) rows.emplace_back(arm0.time[i], arm0.event[i], 0);
  std::sort(rows.begin(), rows.end());
  std::vector<double> time, weight, l;
  std::vector<int> event, x;
  for (std::size_t i = 0; i < rows.size();) {
    std::size_t j = i;
    while (j < rows.size() && rows[j] == rows[i]) ++j;
    time.push_back(std::get<0>(rows[i]));
    event.push_back(std::get<1>(rows[i]));
    x.push_back(std::get<2>(rows[i]));
    weight.push_back(static_cast<double>(j - i));
    i = j;
  }
  l.assign(time.size(), 0.0);

  try {
    const FitCox fit = fit_cox(SurvivalRows{time, event, Covariates{x, l}}, DesignSpec{Term::X}, weight);
    if (!fit.converged) throw Error(ErrorKind::NotConverged, "marginal Cox fit");
    return fit.coefficients[0];
  } catch (const Error& e) {
    throw Error(ErrorKind::EstimationFailure, e.what());
  }
}

double standardize_survival(const FitCox& fit, const TargetPopulation& target,
                            const ObsDataset& source, std::size_t m, Stream& rng) {
  return SurvivalStandardizer(fit, target, source).run(m, rng);
}

AdaptiveMResult adaptive_m(const std::function<double(std::size_t)>& runner,
                           const AdaptiveMControl& control) {
  if (control.m_start == 0 || control.m_cap < control.m_start || !(control.growth > 1.0))
    throw Error(ErrorKind::InvalidArgument, "invalid adaptive-m control");
  std::size_t m = control.m_start;
  double value = runner(m);
  for (;;) {
    if (m >= control.m_cap) return {value, m, true};
    // The small offset keeps representation error in growth (1.1 is not exact)
    // from bumping an integral product up by one.
    const auto grown =
        static_cast<std::size_t>(std::ceil(control.growth * static_cast<double>(m) - 1e-9));
    const std::size_t next = std::min(std::max(grown, m + 1), control.m_cap);
    const double next_value = runner(next);
    if (std::abs(next_value - value) <= control.tolerance) return {value, m, false};
    m = next;
    value = next_value;
  }
}

}  // namespace collapse

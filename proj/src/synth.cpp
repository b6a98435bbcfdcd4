#include "collapse/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "collapse/error.hpp"
#include "collapse/fit.hpp"

namespace collapse {

namespace {

struct Registered {
  std::string_view suffix;
  double beta1, beta2, beta3, kappa1, kappa2;
};

// Shared by the single-study (SS-) and indirect comparison (ITC-) families.
constexpr std::array<Registered, 8> kRegistry{{
    {"1A", 0, 0, 0, 1, 0},
    {"1B", 0, 0, 0, 0, 1},
    {"2A", 1, 0, 0, 1, 0},
    {"2B", 1, 0, 0, 0, 1},
    {"3A", 1, 1, 0, 1, 0},
    {"3B", 1, 1, 0, 0, 1},
    {"4A", 1, 0, 1, 1, 0},
    {"4B", 1, 0, 1, 0, 1},
}};

bool split_label(std::string_view label, Design& design, std::string_view& suffix) {
  if (label.starts_with("SS-")) {
    design = Design::SingleStudy;
    suffix = label.substr(3);
  } else if (label.starts_with("ITC-")) {
    design = Design::ITC;
    suffix = label.substr(4);
  } else {
    return false;
  }
  return std::any_of(kRegistry.begin(), kRegistry.end(),
                     [&](const Registered& r) { return r.suffix == suffix; });
}

// Appends one subject's outcome drawn from the conditional model with the
// given linear predictor.
void draw_outcome(ObsDataset& out, double l, int x, double lp, double intercept, Stream& rng) {
  Subject s{l, x, BinaryOutcome{}};
  if (out.kind() == OutcomeKind::Binary) {
    s.outcome = BinaryOutcome{rng.bernoulli(expit(intercept + lp)) ? 1 : 0};
  } else {
    s.outcome = draw_survival_outcome(lp, rng);
  }
  out.push_back(s);
}

}  // namespace

std::string_view to_string(Design d) { return d == Design::SingleStudy ? "single" : "itc"; }
std::string_view to_string(OutcomeKind k) { return k == OutcomeKind::Binary ? "binary" : "tte"; }

ScenarioSpec registered_scenario(std::string_view label, OutcomeKind outcome) {
  Design design{};
  std::string_view suffix;
  if (!split_label(label, design, suffix))
    throw Error(ErrorKind::InvalidArgument, "unknown scenario label '" + std::string(label) + "'");
  const auto it = std::find_if(kRegistry.begin(), kRegistry.end(),
                               [&](const Registered& r) { return r.suffix == suffix; });
  ScenarioSpec spec;
  spec.design = design;
  spec.outcome = outcome;
  spec.alpha = 1.0;
  spec.beta1 = it->beta1;
  spec.beta2 = it->beta2;
  spec.beta3 = it->beta3;
  spec.kappa1 = it->kappa1;
  spec.kappa2 = it->kappa2;
  spec.label = std::string(label);
  return spec;
}

bool is_registered_label(std::string_view label) {
  Design design{};
  std::string_view suffix;
  return split_label(label, design, suffix);
}

std::vector<std::string> registered_labels(Design design) {
  std::vector<std::string> out;
  const std::string prefix = design == Design::SingleStudy ? "SS-" : "ITC-";
  for (const auto& r : kRegistry) out.push_back(prefix + std::string(r.suffix));
  return out;
}

ScenarioSpec custom_scenario(std::string_view name, Design design, OutcomeKind outcome,
                             double alpha, double beta1, double beta2, double beta3,
                             double kappa1, double kappa2) {
  ScenarioSpec spec;
  spec.design = design;
  spec.outcome = outcome;
  spec.alpha = alpha;
  spec.beta1 = beta1;
  spec.beta2 = beta2;
  spec.beta3 = beta3;
  spec.kappa1 = kappa1;
  spec.kappa2 = kappa2;
  spec.label = "custom:" + std::string(name);
  spec.custom = true;
  return spec;
}

void ObsDataset::reserve(std::size_t n) {
  l_.reserve(n);
  x_.reserve(n);
  if (kind_ == OutcomeKind::Binary) {
    y_.reserve(n);
  } else {
    time_.reserve(n);
    event_.reserve(n);
    entry_.reserve(n);
  }
}

void ObsDataset::push_back(const Subject& s) {
  if (kind_ == OutcomeKind::Binary) {
    const auto* b = std::get_if<BinaryOutcome>(&s.outcome);
    if (b == nullptr) throw Error(ErrorKind::InvalidArgument, "survival subject in binary dataset");
    y_.push_back(b->y);
  } else {
    const auto* v = std::get_if<SurvivalOutcome>(&s.outcome);
    if (v == nullptr) throw Error(ErrorKind::InvalidArgument, "binary subject in survival dataset");
    time_.push_back(v->time);
    event_.push_back(v->event);
    entry_.push_back(v->entry);
  }
  l_.push_back(s.l);
  x_.push_back(s.x);
}

Subject ObsDataset::subject(std::size_t i) const {
  Subject s{l_.at(i), x_.at(i), BinaryOutcome{}};
  if (kind_ == OutcomeKind::Binary)
    s.outcome = BinaryOutcome{y_[i]};
  else
    s.outcome = SurvivalOutcome{time_[i], event_[i], entry_[i]};
  return s;
}

std::size_t ObsDataset::count_treated() const {
  return static_cast<std::size_t>(std::count(x_.begin(), x_.end(), 1));
}

void ObsDataset::require_both_arms() const {
  const std::size_t treated = count_treated();
  if (treated == 0 || treated == size())
    throw Error(ErrorKind::EstimationFailure, "a treatment arm is empty");
}

double weibull_event_time(double linear_predictor, double u) {
  if (!(u > 0.0 && u < 1.0)) throw Error(ErrorKind::InvalidArgument, "u must lie in (0, 1)");
  const double scale = std::pow(0.1 * std::exp(linear_predictor), -2.0 / 3.0);
  return scale * std::pow(-std::log(u), 2.0 / 3.0);
}

SurvivalOutcome draw_survival_outcome(double linear_predictor, Stream& rng) {
  const double y = weibull_event_time(linear_predictor, rng.uniform());
  const double entry = kAccrual * rng.uniform();
  const double follow_up = kStudyEnd - entry;
  return y <= follow_up ? SurvivalOutcome{y, 1, entry} : SurvivalOutcome{follow_up, 0, entry};
}

ObsDataset gen_single_study(const ScenarioSpec& spec, std::size_t n, Stream& rng) {
  if (spec.design != Design::SingleStudy)
    throw Error(ErrorKind::InvalidArgument, "gen_single_study needs a single-study scenario");
  if (n < 2) throw Error(ErrorKind::InvalidArgument, "n must be at least 2");
  ObsDataset out(spec.outcome, Origin::Observational);
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double l = rng.normal(0.0, kCovariateSd);
    const int x = rng.bernoulli(expit(spec.allocation_lp(l))) ? 1 : 0;
    draw_outcome(out, l, x, spec.outcome_lp(x, l), spec.binary_intercept, rng);
  }
  return out;
}

ItcPool draw_itc_pool(const ScenarioSpec& spec, std::size_t pool_size, Stream& rng) {
  // The allocation model gives the probability of joining the study-1 (IPD)
  // population; study 2 receives the complement.
  ItcPool pool;
  for (std::size_t i = 0; i < pool_size; ++i) {
    const double l = rng.normal(0.0, kCovariateSd);
    const bool in_study1 = rng.bernoulli(expit(spec.allocation_lp(l)));
    (in_study1 ? pool.population1 : pool.population2).push_back(l);
  }
  return pool;
}

ItcPair gen_itc_pair(const ScenarioSpec& spec, std::size_t n_per_study, std::size_t pool_size,
                     Stream& rng) {
  if (spec.design != Design::ITC)
    throw Error(ErrorKind::InvalidArgument, "gen_itc_pair needs an ITC scenario");
  if (n_per_study < 2) throw Error(ErrorKind::InvalidArgument, "n_per_study must be at least 2");

  ItcPool pool = draw_itc_pool(spec, pool_size, rng);
  std::array<std::vector<double>, 2> population{std::move(pool.population1), std::move(pool.population2)};
  for (const auto& pop : population)
    if (pop.size() < n_per_study)
      throw Error(ErrorKind::PoolExhausted, "population pool smaller than the requested sample");

  // Partial Fisher-Yates: the first n_per_study entries form a uniform sample
  // without replacement.
  for (auto& pop : population) {
    for (std::size_t i = 0; i < n_per_study; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng.below(pop.size() - i));
      std::swap(pop[i], pop[j]);
    }
  }

  ItcPair pair{ObsDataset(spec.outcome, Origin::Trial1), ObsDataset(spec.outcome, Origin::Trial2)};
  pair.study1.reserve(n_per_study);
  pair.study2.reserve(n_per_study);
  for (std::size_t i = 0; i < n_per_study; ++i) {
    const double l = population[0][i];
    const int x = rng.bernoulli(0.5) ? 1 : 0;
    draw_outcome(pair.study1, l, x, spec.outcome_lp(x, l), spec.binary_intercept, rng);
  }
  for (std::size_t i = 0; i < n_per_study; ++i) {
    const double l = population[1][i];
    const int x = rng.bernoulli(0.5) ? 1 : 0;
    draw_outcome(pair.study2, l, x, spec.beta1 * l, spec.binary_intercept, rng);
  }
  return pair;
}

AggregateData reduce_to_aggregate(const ObsDataset& study2) {
  if (study2.origin() != Origin::Trial2)
    throw Error(ErrorKind::InvalidArgument, "aggregate data come from study 2");
  study2.require_both_arms();

  AggregateData agg;
  const Covariates cov{study2.x(), study2.l()};
  try {
    if (study2.kind() == OutcomeKind::Binary) {
      const FitLogistic fit = fit_logistic(cov, study2.y(), DesignSpec{Term::Intercept, Term::X});
      if (!fit.converged) throw Error(ErrorKind::NotConverged, "study-2 logistic fit");
      agg.theta_ab = fit.coefficient(Term::X);
      agg.se_theta_ab = fit.std_errors[1];
    } else {
      const FitCox fit = fit_cox(SurvivalRows{study2.time(), study2.event(), cov}, DesignSpec{Term::X});
      if (!fit.converged) throw Error(ErrorKind::NotConverged, "study-2 Cox fit");
      agg.theta_ab = fit.coefficient(Term::X);
      agg.se_theta_ab = fit.std_errors[0];
    }
  } catch (const Error& e) {
    throw Error(ErrorKind::EstimationFailure, e.what());
  }

  const auto l = study2.l();
  const double n = static_cast<double>(l.size());
  const double mean = std::accumulate(l.begin(), l.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : l) ss += (v - mean) * (v - mean);
  agg.mu_l2 = mean;
  agg.sd_l2 = std::sqrt(ss / (n - 1.0));
  return agg;
}

}  // namespace collapse

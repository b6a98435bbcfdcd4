#include "collapse/truth.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <numbers>
#include <vector>

#include "collapse/error.hpp"
#include "collapse/fit.hpp"

namespace collapse {

namespace {

struct GaussHermite {
  std::vector<double> nodes;
  std::vector<double> weights;
};

// Golub-Welsch for the weight exp(-x^2).
GaussHermite gauss_hermite(std::size_t n) {
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t k = 1; k < n; ++k) {
    const double b = std::sqrt(static_cast<double>(k) / 2.0);
    jacobi(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k - 1)) = b;
    jacobi(static_cast<Eigen::Index>(k - 1), static_cast<Eigen::Index>(k)) = b;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(jacobi);
  GaussHermite gh;
  for (std::size_t i = 0; i < n; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    const double v0 = solver.eigenvectors()(0, ii);
    gh.nodes.push_back(solver.eigenvalues()(ii));
    gh.weights.push_back(std::sqrt(std::numbers::pi) * v0 * v0);
  }
  return gh;
}

double binary_risk(const ScenarioSpec& spec, int x, double l) {
  return expit(spec.binary_intercept + spec.outcome_lp(x, l));
}

Stream truth_stream(const ScenarioSpec& spec, std::size_t mc_size, std::uint64_t seed) {
  return Stream(seed, label_key(spec.label), Purpose::Truth,
                {static_cast<std::uint64_t>(spec.outcome), static_cast<std::uint64_t>(mc_size)});
}

}  // namespace

std::uint64_t label_key(std::string_view label) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : label) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

double target_acceptance(const ScenarioSpec& spec, double l) {
  return 1.0 - expit(spec.allocation_lp(l));
}

double draw_target_covariate(const ScenarioSpec& spec, Stream& rng) {
  for (;;) {
    const double l = rng.normal(0.0, kCovariateSd);
    if (rng.uniform() < target_acceptance(spec, l)) return l;
  }
}

TruthResult true_marginal_logor(const ScenarioSpec& spec, std::size_t mc_size, std::uint64_t seed) {
  if (spec.outcome != OutcomeKind::Binary)
    throw Error(ErrorKind::InvalidArgument, "log odds ratio truth needs a binary scenario");
  if (mc_size < 2) throw Error(ErrorKind::InvalidArgument, "mc_size must be at least 2");
  Stream rng = truth_stream(spec, mc_size, seed);
  std::vector<double> r1(mc_size), r0(mc_size);
  double p1 = 0.0, p0 = 0.0;
  for (std::size_t i = 0; i < mc_size; ++i) {
    const double l = draw_target_covariate(spec, rng);
    r1[i] = binary_risk(spec, 1, l);
    r0[i] = binary_risk(spec, 0, l);
    p1 += r1[i];
    p0 += r0[i];
  }
  const double n = static_cast<double>(mc_size);
  p1 /= n;
  p0 /= n;

  // Delta-method SE of logit(p1) - logit(p0) from the per-draw influence values.
  const double d1 = 1.0 / (p1 * (1.0 - p1)), d0 = 1.0 / (p0 * (1.0 - p0));
  double ss = 0.0;
  for (std::size_t i = 0; i < mc_size; ++i) {
    const double v = d1 * (r1[i] - p1) - d0 * (r0[i] - p0);
    ss += v * v;
  }
  TruthResult out;
  out.value = logit(p1) - logit(p0);
  out.mc_size = mc_size;
  out.mc_se_hint = std::sqrt(ss / (n - 1.0) / n);
  out.method = TruthMethod::Simulation;
  return out;
}

TruthResult true_marginal_logor_quadrature(const ScenarioSpec& spec) {
  if (spec.outcome != OutcomeKind::Binary)
    throw Error(ErrorKind::InvalidArgument, "log odds ratio truth needs a binary scenario");
  static const GaussHermite gh = gauss_hermite(kQuadratureNodes);
  double mass = 0.0, p1 = 0.0, p0 = 0.0;
  for (std::size_t i = 0; i < gh.nodes.size(); ++i) {
    const double l = std::numbers::sqrt2 * kCovariateSd * gh.nodes[i];
    const double w = gh.weights[i] * target_acceptance(spec, l);
    mass += w;
    p1 += w * binary_risk(spec, 1, l);
    p0 += w * binary_risk(spec, 0, l);
  }
  TruthResult out;
  out.value = logit(p1 / mass) - logit(p0 / mass);
  out.mc_size = kQuadratureNodes;
  out.mc_se_hint = 0.0;
  out.method = TruthMethod::Quadrature;
  return out;
}

TruthResult true_marginal_loghr(const ScenarioSpec& spec, std::size_t mc_size, std::uint64_t seed) {
  if (spec.outcome != OutcomeKind::TTE)
    throw Error(ErrorKind::InvalidArgument, "log hazard ratio truth needs a survival scenario");
  if (mc_size < 2) throw Error(ErrorKind::InvalidArgument, "mc_size must be at least 2");
  Stream rng = truth_stream(spec, mc_size, seed);
  std::vector<double> time(mc_size), l(mc_size, 0.0);
  std::vector<int> event(mc_size), x(mc_size);
  for (std::size_t i = 0; i < mc_size; ++i) {
    const double li = draw_target_covariate(spec, rng);
    x[i] = rng.bernoulli(0.5) ? 1 : 0;
    const SurvivalOutcome o = draw_survival_outcome(spec.outcome_lp(x[i], li), rng);
    time[i] = o.time;
    event[i] = o.event;
  }
  FitCox fit;
  try {
    fit = fit_cox(SurvivalRows{time, event, Covariates{x, l}}, DesignSpec{Term::X});
  } catch (const Error& e) {
    throw Error(ErrorKind::EstimationFailure, std::string("truth simulation: ") + e.what());
  }
  if (!fit.converged) throw Error(ErrorKind::NotConverged, "truth Cox fit");
  TruthResult out;
  out.value = fit.coefficients[0];
  out.mc_size = mc_size;
  out.mc_se_hint = fit.std_errors[0];
  out.method = TruthMethod::Simulation;
  return out;
}

TruthResult true_marginal_effect(const ScenarioSpec& spec, std::size_t mc_size, std::uint64_t seed) {
  return spec.outcome == OutcomeKind::Binary ? true_marginal_logor(spec, mc_size, seed)
                                             : true_marginal_loghr(spec, mc_size, seed);
}

}  // namespace collapse

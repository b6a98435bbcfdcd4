#include "collapse/weights.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>

#include "collapse/error.hpp"
#include "collapse/fit.hpp"

namespace collapse {

namespace {

// log(sum_i exp(v_i)) together with the softmax weights.
double log_sum_exp(const std::vector<double>& v, std::vector<double>& soft) {
  const double vmax = *std::max_element(v.begin(), v.end());
  double s = 0.0;
  soft.resize(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    soft[i] = std::exp(v[i] - vmax);
    s += soft[i];
  }
  for (double& q : soft) q /= s;
  return vmax + std::log(s);
}

struct Tilt1 {
  double f = 0.0;   // log g1
  double df = 0.0;  // d/dA log g1 = tilted mean of d
  double d2f = 0.0;
};

Tilt1 tilt1(std::span<const double> d, double a) {
  std::vector<double> v(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) v[i] = d[i] * a;
  std::vector<double> s;
  Tilt1 t;
  t.f = log_sum_exp(v, s);
  double m = 0.0, m2 = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    m += s[i] * d[i];
    m2 += s[i] * d[i] * d[i];
  }
  t.df = m;
  t.d2f = std::max(0.0, m2 - m * m);
  return t;
}

struct Tilt2 {
  double f = 0.0;
  Eigen::Vector2d grad;
  Eigen::Matrix2d hess;
};

Tilt2 tilt2(std::span<const double> d1, std::span<const double> d2, const Eigen::Vector2d& a) {
  const std::size_t n = d1.size();
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = d1[i] * a[0] + d2[i] * a[1];
  std::vector<double> s;
  Tilt2 t;
  t.f = log_sum_exp(v, s);
  double m1 = 0, m2 = 0, s11 = 0, s12 = 0, s22 = 0;
  for (std::size_t i = 0; i < n; ++i) {
    m1 += s[i] * d1[i];
    m2 += s[i] * d2[i];
  }
  for (std::size_t i = 0; i < n; ++i) {
    const double c1 = d1[i] - m1, c2 = d2[i] - m2;
    s11 += s[i] * c1 * c1;
    s12 += s[i] * c1 * c2;
    s22 += s[i] * c2 * c2;
  }
  t.grad = {m1, m2};
  t.hess << s11, s12, s12, s22;
  return t;
}

MaicSolution finish(std::vector<double>& w, double objective, double grad_norm) {
  MaicSolution sol;
  sol.objective_value = objective;
  sol.gradient_norm = grad_norm;
  sol.ess = effective_sample_size(w);
  return sol;
}

}  // namespace

WeightVector::WeightVector(std::vector<double> values, WeightProvenance provenance)
    : values_(std::move(values)), provenance_(provenance) {
  bool any_positive = false;
  for (double v : values_) {
    if (!std::isfinite(v) || v < 0.0)
      throw Error(ErrorKind::InvalidArgument, "weights must be finite and nonnegative");
    any_positive = any_positive || v > 0.0;
  }
  if (!any_positive) throw Error(ErrorKind::InvalidArgument, "all weights are zero");
}

double effective_sample_size(std::span<const double> w) {
  double s = 0.0, s2 = 0.0;
  for (double v : w) {
    s += v;
    s2 += v * v;
  }
  return s2 > 0.0 ? s * s / s2 : 0.0;
}

std::vector<double> estimate_propensity_logit(const ObsDataset& data, bool quadratic) {
  data.require_both_arms();
  const DesignSpec design = quadratic ? DesignSpec{Term::Intercept, Term::L, Term::L2}
                                      : DesignSpec{Term::Intercept, Term::L};
  const FitLogistic fit = fit_logistic(Covariates{data.x(), data.l()}, data.x(), design);
  if (!fit.converged) throw Error(ErrorKind::NotConverged, "propensity model did not converge");
  std::vector<double> eta(data.size());
  for (std::size_t i = 0; i < eta.size(); ++i) eta[i] = linear_predictor(fit, 0, data.l()[i]);
  return eta;
}

std::vector<double> estimate_propensity(const ObsDataset& data, bool quadratic) {
  std::vector<double> e = estimate_propensity_logit(data, quadratic);
  for (double& v : e) v = expit(v);
  return e;
}

WeightVector atu_weights(std::span<const int> x, std::span<const double> e) {
  if (x.size() != e.size()) throw Error(ErrorKind::InvalidArgument, "x and e lengths differ");
  std::vector<double> w(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(e[i] > 0.0 && e[i] < 1.0))
      throw Error(ErrorKind::InvalidPropensity, "propensity outside (0, 1)");
    w[i] = x[i] ? (1.0 - e[i]) / e[i] : 1.0;
  }
  return {std::move(w), WeightProvenance::ATU};
}

WeightVector atu_weights_from_logit(std::span<const int> x, std::span<const double> eta) {
  if (x.size() != eta.size()) throw Error(ErrorKind::InvalidArgument, "x and eta lengths differ");
  std::vector<double> w(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(eta[i])) throw Error(ErrorKind::InvalidPropensity, "propensity logit is not finite");
    w[i] = x[i] ? std::exp(-eta[i]) : 1.0;
  }
  return {std::move(w), WeightProvenance::ATU};
}

double maic_g1(std::span<const double> l, double mu_target, double a) {
  double g = 0.0;
  for (double v : l) g += std::exp((v - mu_target) * a);
  return g;
}

double maic_g2(std::span<const double> l, double mu_target, double sd_target, double a1, double a2) {
  const double m2 = mu_target * mu_target + sd_target * sd_target;
  double g = 0.0;
  for (double v : l) g += std::exp((v - mu_target) * a1 + (v * v - m2) * a2);
  return g;
}

std::pair<WeightVector, MaicSolution> maic_weights_m1(std::span<const double> l, double mu_target) {
  if (l.empty()) throw Error(ErrorKind::InvalidArgument, "empty covariate vector");
  const auto [lo_it, hi_it] = std::minmax_element(l.begin(), l.end());
  if (!(mu_target > *lo_it && mu_target < *hi_it))
    throw Error(ErrorKind::InfeasibleTarget, "target mean lies outside the open hull of l");

  std::vector<double> d(l.size());
  for (std::size_t i = 0; i < l.size(); ++i) d[i] = l[i] - mu_target;

  // The derivative of log g1 is increasing in A; keep a sign-change bracket so
  // a wild Newton step can fall back to bisection.
  double lo = 0.0, hi = 0.0;
  Tilt1 t = tilt1(d, 0.0);
  if (t.df > 0.0) {
    lo = -1.0;
    while (tilt1(d, lo).df > 0.0) lo *= 2.0;
  } else if (t.df < 0.0) {
    hi = 1.0;
    while (tilt1(d, hi).df < 0.0) hi *= 2.0;
  }

  double a = 0.0;
  int iter = 0;
  constexpr int kMaxIter = 200;
  for (; iter < kMaxIter; ++iter) {
    const double g = std::exp(t.f);
    if (std::abs(g * t.df) < 1e-10) break;
    if (t.df > 0.0) hi = a; else lo = a;
    double next = t.d2f > 0.0 ? a - t.df / t.d2f : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (next == a || hi - lo <= 1e-15 * (1.0 + std::abs(a))) break;
    a = next;
    t = tilt1(d, a);
  }
  if (iter == kMaxIter) throw Error(ErrorKind::SolverFailure, "g1 minimization did not converge");

  std::vector<double> w(l.size());
  double sw = 0.0, swl = 0.0;
  for (std::size_t i = 0; i < l.size(); ++i) {
    w[i] = std::exp(d[i] * a);
    sw += w[i];
    swl += w[i] * l[i];
  }
  if (std::abs(swl / sw - mu_target) > 1e-8)
    throw Error(ErrorKind::SolverFailure, "first-moment balance not reached");
  const double g = std::exp(t.f);
  MaicSolution sol = finish(w, g, std::abs(g * t.df));
  sol.a1 = a;
  sol.iterations = iter;
  return {WeightVector(std::move(w), WeightProvenance::MAIC1), sol};
}

std::pair<WeightVector, MaicSolution> maic_weights_m2(std::span<const double> l, double mu_target,
                                                      double sd_target) {
  if (l.empty()) throw Error(ErrorKind::InvalidArgument, "empty covariate vector");
  if (!(sd_target > 0.0)) throw Error(ErrorKind::InvalidArgument, "sd_target must be positive");
  const double m2 = mu_target * mu_target + sd_target * sd_target;

  // (mu, m2) must sit strictly inside the hull of the points (l_i, l_i^2),
  // which lie on a convex curve: strictly above the polygon through the
  // sorted support points and strictly below the outer chord.
  {
    std::vector<double> s(l.begin(), l.end());
    std::sort(s.begin(), s.end());
    s.erase(std::unique(s.begin(), s.end()), s.end());
    if (!(mu_target > s.front() && mu_target < s.back()))
      throw Error(ErrorKind::InfeasibleTarget, "target mean lies outside the open hull of l");
    const auto up = std::upper_bound(s.begin(), s.end(), mu_target);
    const double a = *(up - 1), b = *up;
    const double lower = (a + b) * mu_target - a * b;
    const double upper = (s.front() + s.back()) * mu_target - s.front() * s.back();
    if (!(m2 > lower && m2 < upper))
      throw Error(ErrorKind::InfeasibleTarget, "moment pair lies outside the open hull");
  }

  const std::size_t n = l.size();
  std::vector<double> d1(n), d2(n);
  for (std::size_t i = 0; i < n; ++i) {
    d1[i] = l[i] - mu_target;
    d2[i] = l[i] * l[i] - m2;
  }

  Eigen::Vector2d a = Eigen::Vector2d::Zero();
  Tilt2 t = tilt2(d1, d2, a);
  int iter = 0;
  constexpr int kMaxIter = 500;
  for (; iter < kMaxIter; ++iter) {
    const double g = std::exp(t.f);
    if (g * t.grad.norm() < 1e-10) break;
    Eigen::Vector2d dir;
    Eigen::LDLT<Eigen::Matrix2d> ldlt(t.hess);
    const bool newton_ok = ldlt.info() == Eigen::Success && ldlt.isPositive() &&
                           ldlt.vectorD().minCoeff() > 1e-14 * std::max(1.0, ldlt.vectorD().maxCoeff());
    dir = newton_ok ? Eigen::Vector2d(-ldlt.solve(t.grad)) : Eigen::Vector2d(-t.grad);
    // Backtracking on the convex objective log g2.
    double step = 1.0;
    Tilt2 next = tilt2(d1, d2, a + dir);
    const double slope = t.grad.dot(dir);
    int halvings = 0;
    while (!(next.f <= t.f + 1e-4 * step * slope) && halvings < 60) {
      step *= 0.5;
      ++halvings;
      next = tilt2(d1, d2, a + step * dir);
    }
    if (halvings == 60 || (step * dir).norm() <= 1e-16 * (1.0 + a.norm())) break;
    a += step * dir;
    t = next;
  }
  if (iter == kMaxIter) throw Error(ErrorKind::SolverFailure, "g2 minimization did not converge");

  std::vector<double> w(n);
  double sw = 0.0, swl = 0.0, swl2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = std::exp(d1[i] * a[0] + d2[i] * a[1]);
    sw += w[i];
    swl += w[i] * l[i];
    swl2 += w[i] * l[i] * l[i];
  }
  if (std::abs(swl / sw - mu_target) > 1e-8 || std::abs(swl2 / sw - m2) > 1e-8)
    throw Error(ErrorKind::SolverFailure, "moment balance not reached");
  const double g = std::exp(t.f);
  MaicSolution sol = finish(w, g, g * t.grad.norm());
  sol.a1 = a[0];
  sol.a2 = a[1];
  sol.iterations = iter;
  return {WeightVector(std::move(w), WeightProvenance::MAIC2), sol};
}

}  // namespace collapse

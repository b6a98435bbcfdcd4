#include <catch_amalgamated.hpp>

#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <vector>

#include "collapse/error.hpp"
#include "collapse/fit.hpp"
#include "collapse/weights.hpp"

using namespace collapse;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

std::vector<double> normalized(std::span<const double> w) {
  const double s = std::accumulate(w.begin(), w.end(), 0.0);
  std::vector<double> out(w.begin(), w.end());
  for (double& v : out) v /= s;
  return out;
}

double weighted_moment(std::span<const double> w, std::span<const double> l, int power) {
  double s = 0.0, sw = 0.0;
  for (std::size_t i = 0; i < l.size(); ++i) {
    s += w[i] * std::pow(l[i], power);
    sw += w[i];
  }
  return s / sw;
}

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::Io;
}

ObsDataset dataset(std::span<const double> l, std::span<const int> x) {
  ObsDataset d(OutcomeKind::Binary, Origin::Observational);
  for (std::size_t i = 0; i < l.size(); ++i) d.push_back({l[i], x[i], BinaryOutcome{0}});
  return d;
}

}  // namespace

TEST_CASE("ATU weights", "[weights]") {
  const std::vector<int> x{0, 1, 1, 0};
  const std::vector<double> e{0.9, 0.5, 0.2, 0.01};
  const auto w = atu_weights(x, e);
  CHECK(w.provenance() == WeightProvenance::ATU);
  CHECK(w[0] == 1.0);
  CHECK(w[1] == 1.0);
  CHECK_THAT(w[2], WithinRel(4.0, 1e-14));
  CHECK(w[3] == 1.0);

  for (double bad : {0.0, 1.0, -0.1, 1.5, std::nan("")}) {
    const std::vector<double> eb{0.5, bad};
    CHECK(kind_of([&] { atu_weights(std::vector<int>{0, 1}, eb); }) == ErrorKind::InvalidPropensity);
  }
}

TEST_CASE("ATU untreated weights are exactly one", "[weights][property]") {
  std::mt19937_64 gen(31);
  std::uniform_real_distribution<double> unif(1e-9, 1.0 - 1e-9);
  std::vector<int> x(10000);
  std::vector<double> e(10000);
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = unif(gen) < 0.5;
    e[i] = unif(gen);
  }
  const auto w = atu_weights(x, e);
  std::size_t not_one = 0;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (x[i] == 0 && w[i] != 1.0) ++not_one;
  CHECK(not_one == 0);
}

TEST_CASE("propensity estimates", "[weights]") {
  SECTION("treatment independent of the covariate") {
    std::mt19937_64 gen(32);
    std::normal_distribution<double> norm(0.0, 1.5);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<double> l(20000);
    std::vector<int> x(20000);
    for (std::size_t i = 0; i < l.size(); ++i) {
      l[i] = norm(gen);
      x[i] = unif(gen) < 0.3;
    }
    const double frac = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
    const auto e = estimate_propensity(dataset(l, x), false);
    for (std::size_t i = 0; i < e.size(); i += 500) CHECK_THAT(e[i], WithinAbs(frac, 0.02));
  }

  SECTION("linear and quadratic assignment models") {
    Stream rng(33, 0, Purpose::Diagnostics);
    const auto lin = gen_single_study(registered_scenario("SS-2A", OutcomeKind::Binary), 100000, rng);
    const auto fit = fit_logistic({lin.x(), lin.l()}, lin.x(), DesignSpec{Term::Intercept, Term::L});
    CHECK(std::abs(fit.coefficient(Term::L) - 1.0) < 3.0 * fit.std_errors[1]);
    const auto e = estimate_propensity(lin, false);
    CHECK_THAT(e[0], WithinRel(expit(linear_predictor(fit, 0, lin.l()[0])), 1e-12));

    const auto quad = gen_single_study(registered_scenario("SS-2B", OutcomeKind::Binary), 100000, rng);
    const auto qfit =
        fit_logistic({quad.x(), quad.l()}, quad.x(), DesignSpec{Term::Intercept, Term::L, Term::L2});
    CHECK(std::abs(qfit.coefficient(Term::L2) - 1.0) < 3.0 * qfit.std_errors[2]);
    const auto eq = estimate_propensity(quad, true);
    // Far in the tails expit rounds to 1; the logit stays finite.
    for (double v : eq) REQUIRE((v > 0.0 && v <= 1.0));
    for (double v : estimate_propensity_logit(quad, true)) REQUIRE(std::isfinite(v));
  }

  SECTION("single arm") {
    const std::vector<double> l{0, 1, 2};
    const std::vector<int> x{1, 1, 1};
    CHECK(kind_of([&] { estimate_propensity(dataset(l, x), false); }) == ErrorKind::EstimationFailure);
  }
}

TEST_CASE("first-moment MAIC examples", "[weights]") {
  SECTION("target at the sample mean") {
    const std::vector<double> l{-1.0, 0.5, 2.0, 3.5};
    const auto [w, sol] = maic_weights_m1(l, 1.25);
    CHECK_THAT(sol.a1, WithinAbs(0.0, 1e-12));
    for (double v : w.values()) CHECK_THAT(v, WithinAbs(1.0, 1e-12));
    CHECK_THAT(sol.ess, WithinAbs(4.0, 1e-10));
    CHECK_FALSE(sol.a2.has_value());
    CHECK(w.provenance() == WeightProvenance::MAIC1);
  }

  SECTION("two support points") {
    const std::vector<double> l{0.0, 1.0};
    const auto [w, sol] = maic_weights_m1(l, 0.75);
    CHECK_THAT(sol.a1, WithinAbs(std::log(3.0), 1e-9));
    const auto p = normalized(w.values());
    CHECK_THAT(p[0], WithinAbs(0.25, 1e-10));
    CHECK_THAT(p[1], WithinAbs(0.75, 1e-10));
    CHECK_THAT(sol.objective_value, WithinRel(maic_g1(l, 0.75, sol.a1), 1e-12));
  }

  SECTION("targets outside the hull") {
    const std::vector<double> l{0.0, 1.0};
    for (double mu : {1.5, 1.0, 0.0, -3.0})
      CHECK(kind_of([&] { maic_weights_m1(l, mu); }) == ErrorKind::InfeasibleTarget);
  }
}

TEST_CASE("second-moment MAIC examples", "[weights]") {
  SECTION("target at the sample moments") {
    const std::vector<double> l{-1.0, 0.5, 2.0, 3.5, 0.0};
    const double mu = 1.0;
    double ss = 0.0;
    for (double v : l) ss += (v - mu) * (v - mu);
    const auto [w, sol] = maic_weights_m2(l, mu, std::sqrt(ss / 5.0));
    CHECK_THAT(sol.a1, WithinAbs(0.0, 1e-10));
    CHECK_THAT(*sol.a2, WithinAbs(0.0, 1e-10));
    for (double v : w.values()) CHECK_THAT(v, WithinAbs(1.0, 1e-10));
  }

  SECTION("three symmetric support points") {
    const std::vector<double> l{-1.0, 0.0, 1.0};
    const auto [w, sol] = maic_weights_m2(l, 0.0, std::sqrt(0.8));
    const auto p = normalized(w.values());
    CHECK_THAT(p[0], WithinAbs(0.4, 1e-9));
    CHECK_THAT(p[1], WithinAbs(0.2, 1e-9));
    CHECK_THAT(p[2], WithinAbs(0.4, 1e-9));
    CHECK_THAT(sol.a1, WithinAbs(0.0, 1e-9));
    // Weights exp(a2 (l^2 - 0.8)) with ratio 2 between the outer and middle points.
    CHECK_THAT(*sol.a2, WithinAbs(std::log(2.0), 1e-9));
  }

  SECTION("hull boundary and outside") {
    const std::vector<double> l{-1.0, 0.0, 1.0};
    CHECK(kind_of([&] { maic_weights_m2(l, 0.0, 1.0); }) == ErrorKind::InfeasibleTarget);
    CHECK(kind_of([&] { maic_weights_m2(l, 0.0, 1.2); }) == ErrorKind::InfeasibleTarget);
    CHECK(kind_of([&] { maic_weights_m2(l, 1.0, 0.1); }) == ErrorKind::InfeasibleTarget);
    // Second moment below the chord between neighbouring support points.
    CHECK(kind_of([&] { maic_weights_m2(l, 0.5, 0.4); }) == ErrorKind::InfeasibleTarget);
    CHECK(kind_of([&] { maic_weights_m2(l, 0.0, 0.0); }) == ErrorKind::InvalidArgument);
  }
}

TEST_CASE("MAIC balance, optimality and diagnostics", "[weights][property]") {
  std::mt19937_64 gen(34);
  std::normal_distribution<double> norm(0.0, 1.5);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::uniform_real_distribution<double> probe(-3.0, 3.0);
  int balanced2 = 0;
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = 50 + static_cast<std::size_t>(unif(gen) * 950);
    std::vector<double> l(n);
    for (double& v : l) v = norm(gen);
    const double mu = -1.0 + 2.0 * unif(gen);
    const double sd = 0.7 + 1.0 * unif(gen);

    const auto [w1, s1] = maic_weights_m1(l, mu);
    CHECK(std::abs(weighted_moment(w1.values(), l, 1) - mu) < 1e-8);
    CHECK(s1.gradient_norm < 1e-8 * s1.objective_value);
    CHECK(s1.ess > 0.0);
    CHECK(s1.ess <= static_cast<double>(n) + 1e-9);
    int worse1 = 0;
    for (int k = 0; k < 1000; ++k) worse1 += s1.objective_value > maic_g1(l, mu, s1.a1 + probe(gen)) * (1 + 1e-12);
    CHECK(worse1 == 0);

    std::pair<WeightVector, MaicSolution> r2{WeightVector::unit(1), {}};
    try {
      r2 = maic_weights_m2(l, mu, sd);
    } catch (const Error& e) {
      // Extreme targets in small samples may be outside the hull.
      CHECK(e.kind() == ErrorKind::InfeasibleTarget);
      continue;
    }
    const auto& [w2, s2] = r2;
    ++balanced2;
    CHECK(std::abs(weighted_moment(w2.values(), l, 1) - mu) < 1e-8);
    CHECK(std::abs(weighted_moment(w2.values(), l, 2) - (mu * mu + sd * sd)) < 1e-8);
    CHECK(s2.gradient_norm < 1e-8 * s2.objective_value);
    CHECK(s2.ess <= static_cast<double>(n) + 1e-9);
    int worse2 = 0;
    for (int k = 0; k < 1000; ++k) {
      const double a1 = s2.a1 + probe(gen), a2 = *s2.a2 + 0.3 * probe(gen);
      worse2 += s2.objective_value > maic_g2(l, mu, sd, a1, a2) * (1 + 1e-12);
    }
    CHECK(worse2 == 0);
  }
  CHECK(balanced2 >= 30);
}

TEST_CASE("effective sample size", "[weights][property]") {
  const std::vector<double> equal(7, 2.5);
  CHECK_THAT(effective_sample_size(equal), WithinRel(7.0, 1e-14));
  const std::vector<double> uneven{1, 2, 3, 4};
  CHECK(effective_sample_size(uneven) < 4.0);
  CHECK_THAT(effective_sample_size(uneven), WithinRel(100.0 / 30.0, 1e-14));
  std::vector<double> scaled(uneven);
  for (double& v : scaled) v *= 1e3;
  CHECK_THAT(effective_sample_size(scaled), WithinRel(effective_sample_size(uneven), 1e-14));
}

TEST_CASE("rescaled MAIC weights leave the weighted fit unchanged", "[weights][property]") {
  Stream rng(35, 0, Purpose::Diagnostics);
  const auto pair = gen_itc_pair(registered_scenario("ITC-2A", OutcomeKind::TTE), 1000, 100000, rng);
  const auto& s1 = pair.study1;
  const auto [w, sol] = maic_weights_m1(s1.l(), -0.8);
  std::vector<double> scaled(w.values().begin(), w.values().end());
  for (double& v : scaled) v *= 123.0;
  const SurvivalRows rows{s1.time(), s1.event(), Covariates{s1.x(), s1.l()}};
  const auto a = fit_cox(rows, DesignSpec{Term::X}, w.values());
  const auto b = fit_cox(rows, DesignSpec{Term::X}, scaled);
  CHECK_THAT(b.coefficients[0], WithinAbs(a.coefficients[0], 1e-8));
}

TEST_CASE("weight vector validation", "[weights]") {
  CHECK_THROWS_AS(WeightVector({1.0, -1.0}, WeightProvenance::Unit), Error);
  CHECK_THROWS_AS(WeightVector({0.0, 0.0}, WeightProvenance::Unit), Error);
  CHECK_THROWS_AS(WeightVector({1.0, INFINITY}, WeightProvenance::Unit), Error);
  CHECK(WeightVector::unit(3).size() == 3);
}

TEST_CASE("ATU weights from the propensity logit", "[weights]") {
  const std::vector<int> x{1, 0, 1, 1};
  const std::vector<double> eta{-2.0, 0.3, 0.0, 4.5};
  std::vector<double> e(eta.size());
  for (std::size_t i = 0; i < e.size(); ++i) e[i] = expit(eta[i]);
  const auto a = atu_weights_from_logit(x, eta);
  const auto b = atu_weights(x, e);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK_THAT(a[i], WithinRel(b[i], 1e-12));
  CHECK(a[1] == 1.0);

  // Far in the tail the probability rounds to 1 but the odds do not.
  const std::vector<double> tail{40.0};
  CHECK(expit(tail[0]) == 1.0);
  CHECK_THAT(atu_weights_from_logit(std::vector<int>{1}, tail)[0], WithinRel(std::exp(-40.0), 1e-14));
  CHECK_THROWS_AS(atu_weights_from_logit(std::vector<int>{1}, std::vector<double>{INFINITY}), Error);
}

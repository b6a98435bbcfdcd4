#pragma once

#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "collapse/synth.hpp"

namespace collapse {

enum class WeightProvenance { Unit, ATU, MAIC1, MAIC2 };

// Nonnegative per-subject weights aligned with a dataset's subject order.
class WeightVector {
 public:
  WeightVector(std::vector<double> values, WeightProvenance provenance);

  static WeightVector unit(std::size_t n) { return {std::vector<double>(n, 1.0), WeightProvenance::Unit}; }

  std::span<const double> values() const { return values_; }
  WeightProvenance provenance() const { return provenance_; }
  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }

 private:
  std::vector<double> values_;
  WeightProvenance provenance_;
};

// Effective sample size (sum w)^2 / sum w^2.
double effective_sample_size(std::span<const double> w);

struct MaicSolution {
  double a1 = 0.0;                // tilt on the first moment
  std::optional<double> a2;       // tilt on the second moment (2nd-moment matching only)
  double objective_value = 0.0;   // g1 or g2 at the solution
  double gradient_norm = 0.0;     // of g1 or g2 at the solution
  double ess = 0.0;
  int iterations = 0;
};

// Fitted Pr(X = 1 | l) from a logistic model on {1, L} or {1, L, L^2}.
std::vector<double> estimate_propensity(const ObsDataset& data, bool quadratic);

// Linear predictor of the same propensity model. Far in the tails expit of it
// rounds to 1, while the odds exp(eta) stay representable.
std::vector<double> estimate_propensity_logit(const ObsDataset& data, bool quadratic);

// Weights targeting the untreated: (1 - e)/e for treated subjects, 1 otherwise.
WeightVector atu_weights(std::span<const int> x, std::span<const double> e);
// The same weights from the propensity logit: exp(-eta) for treated subjects.
WeightVector atu_weights_from_logit(std::span<const int> x, std::span<const double> eta);

// Method-of-moments weights exp((l - mu) A) balancing the first moment.
std::pair<WeightVector, MaicSolution> maic_weights_m1(std::span<const double> l, double mu_target);

// Weights exp((l - mu) A1 + (l^2 - mu^2 - sd^2) A2) balancing the first and
// raw second moments.
std::pair<WeightVector, MaicSolution> maic_weights_m2(std::span<const double> l, double mu_target,
                                                      double sd_target);

// Objective functions, exposed for diagnostics and tests.
double maic_g1(std::span<const double> l, double mu_target, double a);
double maic_g2(std::span<const double> l, double mu_target, double sd_target, double a1, double a2);

}  // namespace collapse

#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string_view>
#include <vector>

namespace collapse {

enum class Term { Intercept, X, L, XL, XL2, L2 };

std::string_view to_string(Term t);

inline double term_value(Term t, int x, double l) {
  switch (t) {
    case Term::Intercept: return 1.0;
    case Term::X: return x;
    case Term::L: return l;
    case Term::XL: return x * l;
    case Term::XL2: return x * l * l;
    case Term::L2: return l * l;
  }
  return 0.0;
}

// Ordered list of model terms, free of duplicates.
class DesignSpec {
 public:
  DesignSpec() = default;
  DesignSpec(std::initializer_list<Term> terms);
  explicit DesignSpec(std::vector<Term> terms);

  const std::vector<Term>& terms() const { return terms_; }
  std::size_t size() const { return terms_.size(); }
  bool contains(Term t) const;
  // Position of `t` in the design, or size() when absent.
  std::size_t index_of(Term t) const;

 private:
  std::vector<Term> terms_;
};

// Covariate columns shared by every model: treatment indicator and L.
struct Covariates {
  std::span<const int> x;
  std::span<const double> l;
};

struct FitLogistic {
  DesignSpec design;
  std::vector<double> coefficients;  // aligned with design.terms()
  std::vector<double> std_errors;    // model-based, from the observed information
  bool converged = false;
  int n_iter = 0;
  double log_likelihood = 0.0;

  // Zero for terms absent from the design.
  double coefficient(Term t) const;
};

struct FitCox {
  DesignSpec design;
  std::vector<double> coefficients;
  std::vector<double> std_errors;
  // Weighted Breslow cumulative baseline hazard at the distinct event times.
  std::vector<double> baseline_times;
  std::vector<double> baseline_cumhaz;
  bool converged = false;
  int n_iter = 0;
  double log_partial_likelihood = 0.0;

  double coefficient(Term t) const;
};

struct LogisticControl {
  int max_iter = 50;
  double deviance_tol = 1e-8;
  double coef_rel_tol = 1e-10;
  double separation_bound = 30.0;
};

// Weighted Bernoulli maximum likelihood by iteratively reweighted least
// squares. `weights` may be empty (unit weights).
FitLogistic fit_logistic(const Covariates& rows, std::span<const int> response,
                         const DesignSpec& design, std::span<const double> weights = {},
                         const LogisticControl& control = {});

struct SurvivalRows {
  std::span<const double> time;
  std::span<const int> event;
  Covariates covariates;
};

struct CoxControl {
  int max_iter = 50;
  double score_tol = 1e-9;
  double monotone_bound = 30.0;
};

// Weighted Cox partial likelihood with Breslow ties, maximized by safeguarded
// Newton iterations.
FitCox fit_cox(const SurvivalRows& rows, const DesignSpec& design,
               std::span<const double> weights = {}, const CoxControl& control = {});

double linear_predictor(const FitLogistic& fit, int x, double l);
double linear_predictor(const FitCox& fit, int x, double l);

inline double expit(double v) {
  if (v >= 0) {
    const double e = std::exp(-v);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(v);
  return e / (1.0 + e);
}

inline double logit(double p) { return std::log(p / (1.0 - p)); }

}  // namespace collapse

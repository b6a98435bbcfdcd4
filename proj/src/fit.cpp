#include "collapse/fit.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "collapse/error.hpp"

namespace collapse {

namespace {

constexpr std::size_t kMaxTerms = 6;

using Small = std::array<double, kMaxTerms>;

void check_weights(std::span<const double> weights, std::size_t n) {
  if (!weights.empty() && weights.size() != n)
    throw Error(ErrorKind::InvalidArgument, "weight vector length does not match rows");
  for (double w : weights) {
    if (!std::isfinite(w) || w < 0.0)
      throw Error(ErrorKind::InvalidArgument, "weights must be finite and nonnegative");
  }
}

inline double weight_at(std::span<const double> weights, std::size_t i) {
  return weights.empty() ? 1.0 : weights[i];
}

// Row-major design matrix evaluated once per fit.
std::vector<double> build_design(const Covariates& rows, const DesignSpec& design) {
  const std::size_t n = rows.x.size();
  const std::size_t p = design.size();
  std::vector<double> z(n * p);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < p; ++j)
      z[i * p + j] = term_value(design.terms()[j], rows.x[i], rows.l[i]);
  return z;
}

// Solves info * delta = score for a symmetric positive definite info;
// throws RankDeficient when the system is singular or indefinite.
Eigen::VectorXd solve_spd(const Eigen::MatrixXd& info, const Eigen::VectorXd& score,
                          Eigen::MatrixXd* inverse = nullptr) {
  Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
    throw Error(ErrorKind::RankDeficient, "information matrix is not positive definite");
  const auto d = ldlt.vectorD();
  const double dmax = d.cwiseAbs().maxCoeff();
  if (dmax <= 0.0 || d.minCoeff() <= 1e-12 * dmax)
    throw Error(ErrorKind::RankDeficient, "information matrix is singular");
  if (inverse != nullptr)
    *inverse = ldlt.solve(Eigen::MatrixXd::Identity(info.rows(), info.cols()));
  return ldlt.solve(score);
}

std::vector<double> std_errors_from(const Eigen::MatrixXd& inverse) {
  std::vector<double> se(static_cast<std::size_t>(inverse.rows()));
  for (Eigen::Index j = 0; j < inverse.rows(); ++j) se[j] = std::sqrt(std::max(0.0, inverse(j, j)));
  return se;
}

template <typename Fit>
double coefficient_of(const Fit& fit, Term t) {
  const std::size_t j = fit.design.index_of(t);
  return j < fit.coefficients.size() ? fit.coefficients[j] : 0.0;
}

template <typename Fit>
double lp_of(const Fit& fit, int x, double l) {
  double s = 0.0;
  for (std::size_t j = 0; j < fit.coefficients.size(); ++j)
    s += fit.coefficients[j] * term_value(fit.design.terms()[j], x, l);
  return s;
}

// ---- logistic ---------------------------------------------------------------

struct LogisticState {
  double deviance = 0.0;
  Eigen::VectorXd score;
  Eigen::MatrixXd info;
};

LogisticState logistic_state(const std::vector<double>& z, std::size_t p,
                             std::span<const int> y, std::span<const double> weights,
                             const Eigen::VectorXd& beta) {
  const std::size_t n = y.size();
  LogisticState s;
  s.score = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p));
  s.info = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p));
  double dev = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double w = weight_at(weights, i);
    if (w == 0.0) continue;
    const double* zi = &z[i * p];
    double eta = 0.0;
    for (std::size_t j = 0; j < p; ++j) eta += beta[static_cast<Eigen::Index>(j)] * zi[j];
    const double mu = expit(eta);
    // log(1 + exp(-|eta|)) form keeps the deviance finite for large |eta|
    const double log1pexp = std::max(eta, 0.0) + std::log1p(std::exp(-std::abs(eta)));
    dev -= 2.0 * w * (y[i] ? eta - log1pexp : -log1pexp);
    const double resid = w * (y[i] - mu);
    const double vw = w * mu * (1.0 - mu);
    for (std::size_t j = 0; j < p; ++j) {
      s.score[static_cast<Eigen::Index>(j)] += resid * zi[j];
      for (std::size_t k = 0; k <= j; ++k)
        s.info(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) += vw * zi[j] * zi[k];
    }
  }
  for (std::size_t j = 0; j < p; ++j)
    for (std::size_t k = 0; k < j; ++k)
      s.info(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) =
          s.info(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k));
  s.deviance = dev;
  return s;
}

// ---- Cox ----------------------------------------------------------------------

struct CoxState {
  double loglik = 0.0;
  Eigen::VectorXd score;
  Eigen::MatrixXd info;
};

class CoxProblem {
 public:
  CoxProblem(const SurvivalRows& rows, const DesignSpec& design, std::span<const double> weights)
      : rows_(rows), weights_(weights), p_(design.size()), z_(build_design(rows.covariates, design)) {
    const std::size_t n = rows.time.size();
    order_.resize(n);
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    std::stable_sort(order_.begin(), order_.end(),
                     [&](std::size_t a, std::size_t b) { return rows.time[a] < rows.time[b]; });
  }

  CoxState evaluate(const Eigen::VectorXd& beta) const {
    const std::size_t n = order_.size();
    const std::size_t p = p_;
    std::vector<double> eta(n, 0.0);
    double eta_max = -INFINITY;
    for (std::size_t i = 0; i < n; ++i) {
      double e = 0.0;
      for (std::size_t j = 0; j < p; ++j) e += beta[static_cast<Eigen::Index>(j)] * z_[i * p + j];
      eta[i] = e;
      if (weight_at(weights_, i) > 0.0) eta_max = std::max(eta_max, e);
    }
    if (!std::isfinite(eta_max)) eta_max = 0.0;

    CoxState st;
    st.score = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p));
    st.info = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p));
    double s0 = 0.0;
    Small s1{};
    std::array<Small, kMaxTerms> s2{};
    std::size_t k = n;
    while (k > 0) {
      const double t = rows_.time[order_[k - 1]];
      std::size_t j = k;
      double d = 0.0;
      Small zsum{};
      double eta_sum = 0.0;
      while (j > 0 && rows_.time[order_[j - 1]] == t) {
        const std::size_t i = order_[j - 1];
        const double w = weight_at(weights_, i);
        if (w > 0.0) {
          const double r = w * std::exp(eta[i] - eta_max);
          const double* zi = &z_[i * p];
          s0 += r;
          for (std::size_t a = 0; a < p; ++a) {
            s1[a] += r * zi[a];
            for (std::size_t b = 0; b <= a; ++b) s2[a][b] += r * zi[a] * zi[b];
          }
          if (rows_.event[i]) {
            d += w;
            eta_sum += w * (eta[i] - eta_max);
            for (std::size_t a = 0; a < p; ++a) zsum[a] += w * zi[a];
          }
        }
        --j;
      }
      if (d > 0.0) {
        st.loglik += eta_sum - d * std::log(s0);
        for (std::size_t a = 0; a < p; ++a) {
          const double ma = s1[a] / s0;
          st.score[static_cast<Eigen::Index>(a)] += zsum[a] - d * ma;
          for (std::size_t b = 0; b <= a; ++b)
            st.info(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) +=
                d * (s2[a][b] / s0 - ma * s1[b] / s0);
        }
      }
      k = j;
    }
    for (std::size_t a = 0; a < p; ++a)
      for (std::size_t b = 0; b < a; ++b)
        st.info(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(a)) =
            st.info(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
    return st;
  }

  // Weighted Breslow increments at the distinct event times, accumulated.
  void baseline(const Eigen::VectorXd& beta, std::vector<double>& times,
                std::vector<double>& cumhaz) const {
    const std::size_t n = order_.size();
    const std::size_t p = p_;
    std::vector<double> desc_times;
    std::vector<double> desc_incr;
    double s0 = 0.0;
    std::size_t k = n;
    while (k > 0) {
      const double t = rows_.time[order_[k - 1]];
      std::size_t j = k;
      double d = 0.0;
      while (j > 0 && rows_.time[order_[j - 1]] == t) {
        const std::size_t i = order_[j - 1];
        const double w = weight_at(weights_, i);
        if (w > 0.0) {
          double e = 0.0;
          for (std::size_t a = 0; a < p; ++a) e += beta[static_cast<Eigen::Index>(a)] * z_[i * p + a];
          s0 += w * std::exp(e);
          if (rows_.event[i]) d += w;
        }
        --j;
      }
      if (d > 0.0) {
        desc_times.push_back(t);
        desc_incr.push_back(d / s0);
      }
      k = j;
    }
    times.assign(desc_times.rbegin(), desc_times.rend());
    cumhaz.resize(times.size());
    double acc = 0.0;
    for (std::size_t q = 0; q < times.size(); ++q) {
      acc += desc_incr[desc_incr.size() - 1 - q];
      cumhaz[q] = acc;
    }
  }

 private:
  const SurvivalRows& rows_;
  std::span<const double> weights_;
  std::size_t p_;
  std::vector<double> z_;
  std::vector<std::size_t> order_;
};

}  // namespace

std::string_view to_string(Term t) {
  switch (t) {
    case Term::Intercept: return "Intercept";
    case Term::X: return "X";
    case Term::L: return "L";
    case Term::XL: return "XL";
    case Term::XL2: return "XL2";
    case Term::L2: return "L2";
  }
  return "?";
}

DesignSpec::DesignSpec(std::initializer_list<Term> terms)
    : DesignSpec(std::vector<Term>(terms)) {}

DesignSpec::DesignSpec(std::vector<Term> terms) : terms_(std::move(terms)) {
  for (std::size_t i = 0; i < terms_.size(); ++i)
    for (std::size_t j = i + 1; j < terms_.size(); ++j)
      if (terms_[i] == terms_[j])
        throw Error(ErrorKind::InvalidArgument,
                    "duplicate design term " + std::string(to_string(terms_[i])));
}

bool DesignSpec::contains(Term t) const { return index_of(t) < terms_.size(); }

std::size_t DesignSpec::index_of(Term t) const {
  return static_cast<std::size_t>(std::find(terms_.begin(), terms_.end(), t) - terms_.begin());
}

double FitLogistic::coefficient(Term t) const { return coefficient_of(*this, t); }
double FitCox::coefficient(Term t) const { return coefficient_of(*this, t); }

double linear_predictor(const FitLogistic& fit, int x, double l) { return lp_of(fit, x, l); }
double linear_predictor(const FitCox& fit, int x, double l) { return lp_of(fit, x, l); }

FitLogistic fit_logistic(const Covariates& rows, std::span<const int> response,
                         const DesignSpec& design, std::span<const double> weights,
                         const LogisticControl& control) {
  const std::size_t n = response.size();
  const std::size_t p = design.size();
  if (rows.x.size() != n || rows.l.size() != n)
    throw Error(ErrorKind::InvalidArgument, "covariate and response lengths differ");
  if (n < 2) throw Error(ErrorKind::InvalidArgument, "logistic fit needs at least 2 rows");
  if (p == 0) throw Error(ErrorKind::InvalidArgument, "empty logistic design");
  check_weights(weights, n);

  double w_total = 0.0;
  double w_events = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double w = weight_at(weights, i);
    w_total += w;
    if (response[i]) w_events += w;
  }
  if (w_events <= 0.0 || w_events >= w_total)
    throw Error(ErrorKind::DegenerateResponse, "response has a single class");

  const std::vector<double> z = build_design(rows, design);
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p));
  LogisticState st = logistic_state(z, p, response, weights, beta);

  FitLogistic fit;
  fit.design = design;
  for (int iter = 1; iter <= control.max_iter; ++iter) {
    const Eigen::VectorXd delta = solve_spd(st.info, st.score);
    double step = 1.0;
    Eigen::VectorXd next = beta + delta;
    LogisticState nst = logistic_state(z, p, response, weights, next);
    for (int half = 0; half < 30 && !(nst.deviance <= st.deviance + 1e-10 * std::abs(st.deviance));
         ++half) {
      step *= 0.5;
      next = beta + step * delta;
      nst = logistic_state(z, p, response, weights, next);
    }
    const double dev_change = std::abs(st.deviance - nst.deviance);
    const double rel_change = (step * delta).cwiseAbs().maxCoeff() / (1.0 + next.cwiseAbs().maxCoeff());
    beta = next;
    st = std::move(nst);
    fit.n_iter = iter;
    if (beta.cwiseAbs().maxCoeff() > control.separation_bound)
      throw Error(ErrorKind::SeparationDetected, "coefficient magnitude exceeds bound");
    if (dev_change < control.deviance_tol || rel_change < control.coef_rel_tol) {
      fit.converged = true;
      break;
    }
  }

  Eigen::MatrixXd inverse;
  solve_spd(st.info, st.score, &inverse);
  fit.coefficients.assign(beta.data(), beta.data() + beta.size());
  fit.std_errors = std_errors_from(inverse);
  fit.log_likelihood = -0.5 * st.deviance;
  return fit;
}

FitCox fit_cox(const SurvivalRows& rows, const DesignSpec& design, std::span<const double> weights,
               const CoxControl& control) {
  const std::size_t n = rows.time.size();
  const std::size_t p = design.size();
  if (design.contains(Term::Intercept))
    throw Error(ErrorKind::InvalidArgument, "Cox designs cannot contain an intercept");
  if (rows.event.size() != n || rows.covariates.x.size() != n || rows.covariates.l.size() != n)
    throw Error(ErrorKind::InvalidArgument, "survival row columns differ in length");
  check_weights(weights, n);

  double events = 0.0;
  std::array<double, 2> arm_events{0.0, 0.0};
  for (std::size_t i = 0; i < n; ++i) {
    if (!rows.event[i]) continue;
    const double w = weight_at(weights, i);
    events += w;
    arm_events[rows.covariates.x[i] ? 1 : 0] += w;
  }
  if (events <= 0.0) throw Error(ErrorKind::NoEvents, "no weighted events");
  if (design.contains(Term::X) && (arm_events[0] <= 0.0 || arm_events[1] <= 0.0))
    throw Error(ErrorKind::MonotoneLikelihood, "a treatment arm has no events");

  CoxProblem problem(rows, design, weights);
  FitCox fit;
  fit.design = design;
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p));
  CoxState st = problem.evaluate(beta);

  if (p == 0) {
    fit.converged = true;
  } else {
    for (int iter = 1; iter <= control.max_iter; ++iter) {
      const Eigen::VectorXd delta = solve_spd(st.info, st.score);
      // A flat likelihood can have a tiny score while Newton still wants to
      // move far, so the step must be small too. With many rows the score
      // carries rounding noise well above the absolute tolerance; then stop
      // once the Newton decrement is at the resolution of the log partial
      // likelihood itself.
      const bool settled = delta.cwiseAbs().maxCoeff() <= 1e-6 * (1.0 + beta.cwiseAbs().maxCoeff());
      if (settled && (st.score.norm() < control.score_tol ||
                      delta.dot(st.score) < 1e-15 * std::max(1.0, std::abs(st.loglik)))) {
        fit.converged = true;
        break;
      }
      double step = 1.0;
      Eigen::VectorXd next = beta + delta;
      CoxState nst = problem.evaluate(next);
      for (int half = 0; half < 30 && !(nst.loglik >= st.loglik - 1e-10 * std::abs(st.loglik));
           ++half) {
        step *= 0.5;
        next = beta + step * delta;
        nst = problem.evaluate(next);
      }
      const double moved = (step * delta).cwiseAbs().maxCoeff();
      beta = next;
      st = std::move(nst);
      fit.n_iter = iter;
      if (beta.cwiseAbs().maxCoeff() > control.monotone_bound)
        throw Error(ErrorKind::MonotoneLikelihood, "coefficient drifted past bound");
      // Newton has stalled at the limit of floating-point resolution.
      if (moved <= 1e-13 * (1.0 + beta.cwiseAbs().maxCoeff())) {
        fit.converged = true;
        break;
      }
    }
    if (!fit.converged && st.score.norm() < control.score_tol) fit.converged = true;
  }

  if (p > 0) {
    Eigen::MatrixXd inverse;
    solve_spd(st.info, st.score, &inverse);
    fit.std_errors = std_errors_from(inverse);
  }
  fit.coefficients.assign(beta.data(), beta.data() + beta.size());
  fit.log_partial_likelihood = st.loglik;
  problem.baseline(beta, fit.baseline_times, fit.baseline_cumhaz);
  return fit;
}

}  // namespace collapse

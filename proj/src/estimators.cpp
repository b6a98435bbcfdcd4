#include "collapse/estimators.hpp"

#include "collapse/error.hpp"
#include "collapse/fit.hpp"
#include "collapse/weights.hpp"

namespace collapse {

namespace {

// Coefficient of X in a treatment-only model, optionally weighted.
double treatment_only(const ObsDataset& data, std::span<const double> weights = {}) {
  const Covariates cov{data.x(), data.l()};
  if (data.kind() == OutcomeKind::Binary) {
    const FitLogistic fit = fit_logistic(cov, data.y(), DesignSpec{Term::Intercept, Term::X}, weights);
    if (!fit.converged) throw Error(ErrorKind::NotConverged, "treatment-only logistic fit");
    return fit.coefficient(Term::X);
  }
  const FitCox fit = fit_cox(SurvivalRows{data.time(), data.event(), cov}, DesignSpec{Term::X}, weights);
  if (!fit.converged) throw Error(ErrorKind::NotConverged, "treatment-only Cox fit");
  return fit.coefficient(Term::X);
}

// Conditional outcome model averaged over `target`. Survival outcomes go
// through the adaptive-m loop with one stream per (method, m).
void standardized(const ObsDataset& data, const TargetPopulation& target, bool interaction,
                  const StreamKey& key, MethodCode code, const EstimatorOptions& options,
                  Estimate& out) {
  const Covariates cov{data.x(), data.l()};
  if (data.kind() == OutcomeKind::Binary) {
    const DesignSpec design = interaction ? DesignSpec{Term::Intercept, Term::X, Term::L, Term::XL}
                                          : DesignSpec{Term::Intercept, Term::X, Term::L};
    const FitLogistic fit = fit_logistic(cov, data.y(), design);
    if (!fit.converged) throw Error(ErrorKind::NotConverged, "conditional logistic fit");
    out.value = standardize_binary(fit, target);
    return;
  }
  const DesignSpec design =
      interaction ? DesignSpec{Term::X, Term::L, Term::XL} : DesignSpec{Term::X, Term::L};
  const FitCox fit = fit_cox(SurvivalRows{data.time(), data.event(), cov}, design);
  if (!fit.converged) throw Error(ErrorKind::NotConverged, "conditional Cox fit");
  const SurvivalStandardizer standardizer(fit, target, data);
  const AdaptiveMResult r = adaptive_m(
      [&](std::size_t m) {
        Stream rng = key.stream(Purpose::SurvivalStandardization,
                                {static_cast<std::uint64_t>(code), static_cast<std::uint64_t>(m)});
        return standardizer.run(m, rng);
      },
      options.adaptive);
  out.value = r.value;
  out.m_used = r.m_used;
  out.m_capped = r.capped;
}

Estimate failed(Estimate e, const std::exception& err) {
  e.value.reset();
  e.failure_reason = err.what();
  return e;
}

}  // namespace

std::string_view to_string(MethodCode code) {
  switch (code) {
    case MethodCode::A1: return "A1";
    case MethodCode::A2: return "A2";
    case MethodCode::A3: return "A3";
    case MethodCode::A4: return "A4";
    case MethodCode::A5: return "A5";
  }
  return "?";
}

std::string_view method_name(MethodId id) {
  if (id.setting == Setting::Single) {
    switch (id.code) {
      case MethodCode::A1: return "A1. Univ.";
      case MethodCode::A2: return "A2. PSW";
      case MethodCode::A3: return "A3. PSW (quad.)";
      case MethodCode::A4: return "A4. Std.";
      case MethodCode::A5: return "A5. Std. (int.)";
    }
  }
  switch (id.code) {
    case MethodCode::A1: return "A1. Bucher";
    case MethodCode::A2: return "A2. MAIC (1st)";
    case MethodCode::A3: return "A3. MAIC (1st+2nd)";
    case MethodCode::A4: return "A4. STC";
    case MethodCode::A5: return "A5. STC (int.)";
  }
  return "?";
}

Estimate estimate_single(const ObsDataset& data, MethodId method, const StreamKey& key,
                         const EstimatorOptions& options) {
  if (method.setting != Setting::Single)
    throw Error(ErrorKind::InvalidArgument, "estimate_single needs a single-study method");
  Estimate out;
  out.method = method;
  try {
    data.require_both_arms();
    switch (method.code) {
      case MethodCode::A1:
        out.value = treatment_only(data);
        break;
      case MethodCode::A2:
      case MethodCode::A3: {
        const auto eta = estimate_propensity_logit(data, method.code == MethodCode::A3);
        const WeightVector w = atu_weights_from_logit(data.x(), eta);
        out.value = treatment_only(data, w.values());
        break;
      }
      case MethodCode::A4:
      case MethodCode::A5:
        standardized(data, TargetPopulation::empirical_untreated(data), method.code == MethodCode::A5,
                     key, method.code, options, out);
        break;
    }
  } catch (const Error& err) {
    return failed(std::move(out), err);
  }
  return out;
}

Estimate estimate_itc(const ObsDataset& study1, const AggregateData& agg, MethodId method,
                      const StreamKey& key, const EstimatorOptions& options) {
  if (method.setting != Setting::ITC)
    throw Error(ErrorKind::InvalidArgument, "estimate_itc needs an ITC method");
  Estimate out;
  out.method = method;
  try {
    study1.require_both_arms();
    double theta_ac = 0.0;
    switch (method.code) {
      case MethodCode::A1:
        theta_ac = treatment_only(study1);
        break;
      case MethodCode::A2: {
        const auto [w, sol] = maic_weights_m1(study1.l(), agg.mu_l2);
        theta_ac = treatment_only(study1, w.values());
        break;
      }
      case MethodCode::A3: {
        const auto [w, sol] = maic_weights_m2(study1.l(), agg.mu_l2, agg.sd_l2);
        theta_ac = treatment_only(study1, w.values());
        break;
      }
      case MethodCode::A4:
      case MethodCode::A5: {
        Stream rng = key.stream(Purpose::PseudoPopulation);
        const auto target = TargetPopulation::pseudo_normal(agg.mu_l2, agg.sd_l2, options.pseudo_size, rng);
        standardized(study1, target, method.code == MethodCode::A5, key, method.code, options, out);
        theta_ac = *out.value;
        break;
      }
    }
    out.value = theta_ac - agg.theta_ab;
  } catch (const Error& err) {
    return failed(std::move(out), err);
  }
  return out;
}

}  // namespace collapse

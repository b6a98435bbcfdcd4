#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "collapse/rng.hpp"

namespace collapse {

enum class Design { SingleStudy, ITC };
enum class OutcomeKind { Binary, TTE };
enum class Origin { Observational, Trial1, Trial2 };

std::string_view to_string(Design d);
std::string_view to_string(OutcomeKind k);

// Administrative end of follow-up, in years since the start of recruitment.
inline constexpr double kStudyEnd = 10.0;
// Recruitment window length; entry times are uniform on [0, kAccrual].
inline constexpr double kAccrual = 2.0;
inline constexpr double kCovariateSd = 1.5;

// Coefficients and design flags for one simulation configuration.
//
// For ITC designs `alpha`, `beta2` and `beta3` are the study-1 (A vs C)
// coefficients; the study-2 (A vs B) treatment coefficients are fixed at
// zero and deliberately not representable here.
struct ScenarioSpec {
  Design design = Design::SingleStudy;
  OutcomeKind outcome = OutcomeKind::Binary;
  double alpha = 1.0;
  double beta1 = 0.0;
  double beta2 = 0.0;
  double beta3 = 0.0;
  double kappa1 = 0.0;
  double kappa2 = 0.0;
  // Intercept of the binary outcome model (unused for TTE outcomes).
  double binary_intercept = 1.0;
  std::string label;
  bool custom = false;

  // Linear predictor of the (study-1) outcome model, excluding the binary
  // intercept.
  double outcome_lp(int x, double l) const {
    return alpha * x + beta1 * l + beta2 * x * l + beta3 * x * l * l;
  }
  double allocation_lp(double l) const { return kappa1 * l + kappa2 * l * l; }
};

// One of the 16 registered configurations, e.g. ("SS-2A", TTE) or ("ITC-4B", Binary).
ScenarioSpec registered_scenario(std::string_view label, OutcomeKind outcome);
bool is_registered_label(std::string_view label);
std::vector<std::string> registered_labels(Design design);
// Custom configurations carry a "custom:" label prefix and never collide with
// the registered ones.
ScenarioSpec custom_scenario(std::string_view name, Design design, OutcomeKind outcome,
                             double alpha, double beta1, double beta2, double beta3,
                             double kappa1, double kappa2);

struct BinaryOutcome {
  int y = 0;
};

struct SurvivalOutcome {
  double time = 0.0;  // years since the subject's entry
  int event = 0;
  double entry = 0.0;  // years since the start of recruitment
};

struct Subject {
  double l = 0.0;
  int x = 0;
  std::variant<BinaryOutcome, SurvivalOutcome> outcome;
};

// Column-oriented store of subjects with a homogeneous outcome kind. Binary
// datasets fill `y`; survival datasets fill `time`, `event` and `entry`.
class ObsDataset {
 public:
  ObsDataset(OutcomeKind kind, Origin origin) : kind_(kind), origin_(origin) {}

  void push_back(const Subject& s);
  void reserve(std::size_t n);

  OutcomeKind kind() const { return kind_; }
  Origin origin() const { return origin_; }
  std::size_t size() const { return l_.size(); }
  bool empty() const { return l_.empty(); }
  Subject subject(std::size_t i) const;

  std::span<const double> l() const { return l_; }
  std::span<const int> x() const { return x_; }
  std::span<const int> y() const { return y_; }
  std::span<const double> time() const { return time_; }
  std::span<const int> event() const { return event_; }
  std::span<const double> entry() const { return entry_; }

  std::size_t count_treated() const;
  // Throws EstimationFailure unless both arms contain at least one subject.
  void require_both_arms() const;

 private:
  OutcomeKind kind_;
  Origin origin_;
  std::vector<double> l_;
  std::vector<int> x_;
  std::vector<int> y_;
  std::vector<double> time_;
  std::vector<int> event_;
  std::vector<double> entry_;
};

// Published summary of study 2.
struct AggregateData {
  double theta_ab = 0.0;
  double se_theta_ab = 0.0;
  double mu_l2 = 0.0;
  double sd_l2 = 0.0;
};

// Inverse-survival transform for the Weibull outcome (shape 3/2, scale
// (0.1 exp(lp))^(-2/3)); the conditional hazard is proportional to exp(lp).
double weibull_event_time(double linear_predictor, double u);

// Weibull event time, uniform entry and administrative censoring at the
// study end, as used for every survival subject.
SurvivalOutcome draw_survival_outcome(double linear_predictor, Stream& rng);

ObsDataset gen_single_study(const ScenarioSpec& spec, std::size_t n, Stream& rng);

struct ItcPair {
  ObsDataset study1;
  ObsDataset study2;
};

inline constexpr std::size_t kDefaultPoolSize = 100000;

// Covariate pool split into the study-1 and study-2 populations, with
// Pr(study 1 | l) = expit(kappa1 l + kappa2 l^2).
struct ItcPool {
  std::vector<double> population1;
  std::vector<double> population2;
};

ItcPool draw_itc_pool(const ScenarioSpec& spec, std::size_t pool_size, Stream& rng);

ItcPair gen_itc_pair(const ScenarioSpec& spec, std::size_t n_per_study, std::size_t pool_size,
                     Stream& rng);

AggregateData reduce_to_aggregate(const ObsDataset& study2);

}  // namespace collapse

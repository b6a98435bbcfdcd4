#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

#include "collapse/rng.hpp"
#include "collapse/standardize.hpp"
#include "collapse/synth.hpp"

namespace collapse {

enum class Setting { Single, ITC };

// A1: unadjusted / Bucher. A2: PSW linear / MAIC first moment. A3: PSW
// quadratic / MAIC first and second moments. A4: standardization / STC.
// A5: standardization / STC with the treatment-by-L interaction.
enum class MethodCode { A1 = 1, A2, A3, A4, A5 };

inline constexpr std::array<MethodCode, 5> kAllMethods{MethodCode::A1, MethodCode::A2, MethodCode::A3,
                                                        MethodCode::A4, MethodCode::A5};

struct MethodId {
  Setting setting = Setting::Single;
  MethodCode code = MethodCode::A1;

  bool operator==(const MethodId&) const = default;
};

std::string_view to_string(MethodCode code);  // "A1" .. "A5"
// Column header used in the result tables, e.g. "A2. MAIC (1st)".
std::string_view method_name(MethodId id);

struct Estimate {
  MethodId method;
  std::optional<double> value;
  std::optional<std::string> failure_reason;
  std::optional<std::size_t> m_used;  // survival standardization only
  bool m_capped = false;

  bool failed() const { return !value.has_value(); }
};

struct EstimatorOptions {
  std::size_t pseudo_size = 10000;
  AdaptiveMControl adaptive;
};

// One single-study estimate. Random streams for survival standardization are
// derived from `key`, the method and m, so estimates are reproducible.
Estimate estimate_single(const ObsDataset& data, MethodId method, const StreamKey& key,
                         const EstimatorOptions& options = {});

// Anchored C-vs-B estimate in the study-2 population. All methods of a
// replication draw the same pseudo-population from `key`.
Estimate estimate_itc(const ObsDataset& study1, const AggregateData& agg, MethodId method,
                      const StreamKey& key, const EstimatorOptions& options = {});

}  // namespace collapse

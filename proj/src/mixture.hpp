#pragma once

#include <cstddef>

namespace collapse::detail {

// acc[i] += sum_j exp(-cumhaz[i] * risk[j]).
void accumulate_mixture(const double* cumhaz, std::size_t k, const double* risk, std::size_t w,
                        double* acc);

}  // namespace collapse::detail

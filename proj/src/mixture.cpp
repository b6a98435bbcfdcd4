#include "mixture.hpp"

#include <cmath>

namespace collapse::detail {

// Built with -ffast-math so the inner loop uses the vector exp from libmvec;
// the clones pick the widest variant the CPU supports.
__attribute__((target_clones("avx2", "default")))
void accumulate_mixture(const double* __restrict cumhaz, std::size_t k, const double* __restrict risk,
                        std::size_t w, double* __restrict acc) {
  for (std::size_t j = 0; j < w; ++j) {
    const double r = risk[j];
    for (std::size_t i = 0; i < k; ++i) acc[i] += std::exp(-cumhaz[i] * r);
  }
}

}  // namespace collapse::detail

#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace collapse {

// Purposes keep the streams for data generation, pseudo-populations and
// survival standardization disjoint within a replication.
enum class Purpose : std::uint64_t {
  Data = 1,
  PseudoPopulation = 2,
  SurvivalStandardization = 3,
  Truth = 4,
  Diagnostics = 5,
};

// A random stream keyed by (seed, index, purpose, extra...). Two streams with
// the same key produce identical sequences regardless of which thread builds
// them or in what order, which is what makes replications reproducible.
class Stream {
 public:
  Stream(std::uint64_t seed, std::uint64_t index, Purpose purpose,
         std::initializer_list<std::uint64_t> extra = {});

  // Uniform on the open interval (0, 1); endpoint draws are rejected.
  double uniform();
  double normal(double mean, double sd);
  bool bernoulli(double p);
  // Uniform integer on [0, n).
  std::uint64_t below(std::uint64_t n);

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_;
};

// Per-replication handle from which purpose-specific streams are derived.
struct StreamKey {
  std::uint64_t seed = 0;
  std::uint64_t replication = 0;

  Stream stream(Purpose purpose, std::initializer_list<std::uint64_t> extra = {}) const {
    return Stream(seed, replication, purpose, extra);
  }
};

}  // namespace collapse

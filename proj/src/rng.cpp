#include "collapse/rng.hpp"
#include "collapse/error.hpp"

#include <vector>

namespace collapse {

namespace {

void push64(std::vector<std::uint32_t>& words, std::uint64_t v) {
  words.push_back(static_cast<std::uint32_t>(v));
  words.push_back(static_cast<std::uint32_t>(v >> 32));
}

}  // namespace

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "invalid-argument";
    case ErrorKind::PoolExhausted: return "pool-exhausted";
    case ErrorKind::DegenerateResponse: return "degenerate-response";
    case ErrorKind::SeparationDetected: return "separation-detected";
    case ErrorKind::RankDeficient: return "rank-deficient";
    case ErrorKind::NoEvents: return "no-events";
    case ErrorKind::MonotoneLikelihood: return "monotone-likelihood";
    case ErrorKind::NotConverged: return "not-converged";
    case ErrorKind::InvalidPropensity: return "invalid-propensity";
    case ErrorKind::InfeasibleTarget: return "infeasible-target";
    case ErrorKind::SolverFailure: return "solver-failure";
    case ErrorKind::DegenerateMarginal: return "degenerate-marginal";
    case ErrorKind::EstimationFailure: return "estimation-failure";
    case ErrorKind::InsufficientReplications: return "insufficient-replications";
    case ErrorKind::Usage: return "usage";
    case ErrorKind::Io: return "io";
  }
  return "unknown";
}

Stream::Stream(std::uint64_t seed, std::uint64_t index, Purpose purpose,
               std::initializer_list<std::uint64_t> extra) {
  std::vector<std::uint32_t> words;
  words.reserve(6 + 2 * extra.size());
  push64(words, seed);
  push64(words, index);
  push64(words, static_cast<std::uint64_t>(purpose));
  for (auto e : extra) push64(words, e);
  std::seed_seq seq(words.begin(), words.end());
  engine_.seed(seq);
}

double Stream::uniform() {
  for (;;) {
    const double u = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    if (u > 0.0 && u < 1.0) return u;
  }
}

double Stream::normal(double mean, double sd) {
  return mean + sd * normal_(engine_);
}

bool Stream::bernoulli(double p) { return uniform() < p; }

std::uint64_t Stream::below(std::uint64_t n) {
  if (n == 0) throw Error(ErrorKind::InvalidArgument, "below(0)");
  std::uniform_int_distribution<std::uint64_t> dist(0, n - 1);
  return dist(engine_);
}

}  // namespace collapse

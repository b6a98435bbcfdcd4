#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace collapse {

enum class ErrorKind {
  InvalidArgument,
  PoolExhausted,
  DegenerateResponse,
  SeparationDetected,
  RankDeficient,
  NoEvents,
  MonotoneLikelihood,
  NotConverged,
  InvalidPropensity,
  InfeasibleTarget,
  SolverFailure,
  DegenerateMarginal,
  EstimationFailure,
  InsufficientReplications,
  Usage,
  Io,
};

std::string_view to_string(ErrorKind kind);

// Every failure raised by the library carries a machine-readable kind so the
// harness can tally estimation failures without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace collapse

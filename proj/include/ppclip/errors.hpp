#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace ppclip {

/// Broad failure classes. The CLI maps these onto process exit codes.
enum class ErrorKind {
  invalid_input,
  unsupported,
  precondition,
  numerical_failure,
  non_convergence,
  calibration,
  config,
  io,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_input: return "invalid-input";
    case ErrorKind::unsupported: return "unsupported";
    case ErrorKind::precondition: return "precondition";
    case ErrorKind::numerical_failure: return "numerical-failure";
    case ErrorKind::non_convergence: return "non-convergence";
    case ErrorKind::calibration: return "calibration";
    case ErrorKind::config: return "config";
    case ErrorKind::io: return "io";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Raised by the optimizers; carries the (1-based) step at which the
/// iterate became non-finite or exceeded the divergence threshold.
class NumericalError : public Error {
 public:
  NumericalError(const std::string& what, std::uint64_t step)
      : Error(ErrorKind::numerical_failure,
              what + " at step " + std::to_string(step)),
        step_(step) {}

  std::uint64_t step() const noexcept { return step_; }

 private:
  std::uint64_t step_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) fail(kind, what);
}

}  // namespace ppclip

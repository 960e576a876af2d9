#pragma once

#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>

#include "ppclip/core.hpp"
#include "ppclip/errors.hpp"

namespace ppclip {

// log is the natural logarithm everywhere in this file.

struct PrivacyBudget {
  double epsilon = 0.1;
  double delta = 1e-5;
  double m = 1e5;  ///< dataset size
  double T = 1e5;  ///< iterations
  std::size_t d = 1;

  void validate() const {
    require(epsilon > 0.0 && std::isfinite(epsilon), ErrorKind::calibration, "privacy: epsilon must be positive");
    require(delta > 0.0 && delta < 1.0, ErrorKind::calibration, "privacy: delta must lie in (0, 1)");
    require(m >= 1.0, ErrorKind::calibration, "privacy: m must be >= 1");
    require(T >= 1.0, ErrorKind::calibration, "privacy: T must be >= 1");
    require(d >= 1, ErrorKind::calibration, "privacy: d must be >= 1");
  }

  /// The calibration regime epsilon <= T/m^2.
  bool in_regime() const { return epsilon <= T / (m * m); }
};

struct DpSigmaOptions {
  /// Throw when epsilon > T/m^2 instead of just reporting it.
  bool strict = false;
};

struct DpSigmaResult {
  double sigma = 0.0;
  bool regime_ok = true;
  std::string note;
};

/// sigma_DP = c sqrt(T log(1/delta)) / (m epsilon), with the regime check.
inline DpSigmaResult dp_sigma_checked(double c, const PrivacyBudget& b, DpSigmaOptions opt = {}) {
  require(c > 0.0 && std::isfinite(c), ErrorKind::calibration, "dp_sigma: c must be positive");
  b.validate();
  DpSigmaResult r;
  r.sigma = c * std::sqrt(b.T * std::log(1.0 / b.delta)) / (b.m * b.epsilon);
  r.regime_ok = b.in_regime();
  if (!r.regime_ok) {
    std::ostringstream os;
    os << "dp_sigma: epsilon <= T/m^2 violated (epsilon=" << b.epsilon << ", T/m^2=" << b.T / (b.m * b.m) << ")";
    r.note = os.str();
    if (opt.strict) throw Error(ErrorKind::calibration, r.note);
  }
  return r;
}

inline double dp_sigma(double c, const PrivacyBudget& b, DpSigmaOptions opt = {}) {
  return dp_sigma_checked(c, b, opt).sigma;
}

/// phi = d log(1/delta) / (m^2 epsilon^2)
inline double privacy_phi(const PrivacyBudget& b) {
  b.validate();
  return static_cast<double>(b.d) * std::log(1.0 / b.delta) / (b.m * b.m * b.epsilon * b.epsilon);
}

// ---------------------------------------------------------------------------
// Optimal constant step
// ---------------------------------------------------------------------------

/// Delta(kappa) = 2 (2(c^2 + G^2) + d sigma^2) / (T kappa^2 gap0)
inline double step_delta(const OptimalStepInputs& in, double kappa) {
  require(kappa > 0.0, ErrorKind::precondition, "optimal_step_size: modulus must be positive");
  require(in.horizon >= 1, ErrorKind::precondition, "optimal_step_size: T must be >= 1");
  require(in.initial_gap_sq > 0.0, ErrorKind::precondition, "optimal_step_size: initial gap must be positive");
  const double c1 = 2.0 * (in.clip_c * in.clip_c + in.grad_bound * in.grad_bound) +
                    static_cast<double>(in.dim) * in.sigma_dp * in.sigma_dp;
  return 2.0 * c1 / (static_cast<double>(in.horizon) * kappa * kappa * in.initial_gap_sq);
}

/// gamma = log(1/Delta(kappa)) / (kappa T). With kappa = mu_tilde this is
/// the shift-aware optimum; kappa = mu gives the shift-unaware step.
inline double step_for_modulus(const OptimalStepInputs& in, double kappa) {
  require(in.grad_bound > in.clip_c, ErrorKind::precondition,
          "optimal_step_size: requires G > c");
  const double delta = step_delta(in, kappa);
  if (!(delta < 1.0)) {
    throw Error(ErrorKind::precondition,
                "optimal_step_size: Delta >= 1, no step improves the bound (degenerate regime)");
  }
  return std::log(1.0 / delta) / (kappa * static_cast<double>(in.horizon));
}

inline double optimal_step_size(const OptimalStepInputs& in) { return step_for_modulus(in, in.mu_tilde); }

inline double optimal_step_size(double mu_tilde, std::uint64_t T, double c, double G, std::size_t d,
                                double sigma_dp, double initial_gap_sq) {
  return optimal_step_size(OptimalStepInputs{mu_tilde, T, c, G, d, sigma_dp, initial_gap_sq});
}

/// Shift-unaware step: the same formula with mu in place of mu_tilde.
inline double naive_step_size(const OptimalStepInputs& in, double mu) { return step_for_modulus(in, mu); }

inline StepSchedule optimal_schedule(const OptimalStepInputs& in) {
  return StepSchedule::theoretical_optimal(optimal_step_size(in), in);
}

// ---------------------------------------------------------------------------
// Optimal clipping threshold
// ---------------------------------------------------------------------------

struct ClipThreshold {
  double c_star = 0.0;
  /// G^2 (1 + phi): the scale of the deviation bound, up to 1/mu_tilde^2.
  double deviation_scale = 0.0;
};

/// c* = 2 G m^2 eps^2 / (d log(1/delta) + 2 m^2 eps^2)
inline ClipThreshold optimal_clip_threshold(double G, double m, double epsilon, double delta, std::size_t d) {
  require(G > 0.0 && std::isfinite(G), ErrorKind::invalid_input, "optimal_clip_threshold: G must be positive");
  require(m > 0.0 && epsilon > 0.0, ErrorKind::invalid_input, "optimal_clip_threshold: m, epsilon must be positive");
  require(delta > 0.0 && delta < 1.0, ErrorKind::invalid_input, "optimal_clip_threshold: delta must lie in (0,1)");
  require(d >= 1, ErrorKind::invalid_input, "optimal_clip_threshold: d must be >= 1");
  const double me2 = m * m * epsilon * epsilon;
  const double dl = static_cast<double>(d) * std::log(1.0 / delta);
  ClipThreshold out;
  out.c_star = 2.0 * G * me2 / (dl + 2.0 * me2);
  out.deviation_scale = G * G * (1.0 + dl / me2);
  return out;
}

}  // namespace ppclip

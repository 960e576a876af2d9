#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ppclip/errors.hpp"

namespace ppclip {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// ---------------------------------------------------------------------------
// Dense vector helpers. Model dimensions here are small (1..~50), so plain
// loops over spans are all we need.
// ---------------------------------------------------------------------------

inline bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm_sq(std::span<const double> v) { return dot(v, v); }

inline double norm(std::span<const double> v) { return std::sqrt(norm_sq(v)); }

inline double distance_sq(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

/// y += alpha * x
inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

/// The decision model. Entries are finite and the dimension never changes
/// after construction; mutation goes through `values()` and callers that
/// can introduce non-finite values re-check with `is_finite()`.
class ParamVector {
 public:
  ParamVector() = default;

  explicit ParamVector(std::size_t dim, double fill = 0.0) : values_(dim, fill) {
    require(std::isfinite(fill), ErrorKind::invalid_input, "ParamVector: non-finite fill value");
  }

  explicit ParamVector(std::vector<double> values) : values_(std::move(values)) {
    require(all_finite(values_), ErrorKind::invalid_input, "ParamVector: non-finite entry");
  }

  ParamVector(std::initializer_list<double> values) : ParamVector(std::vector<double>(values)) {}

  std::size_t dim() const noexcept { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }
  double& operator[](std::size_t i) { return values_[i]; }

  std::span<const double> values() const noexcept { return values_; }
  std::span<double> values() noexcept { return values_; }
  const std::vector<double>& vec() const noexcept { return values_; }

  bool is_finite() const { return all_finite(values_); }

  friend bool operator==(const ParamVector&, const ParamVector&) = default;

 private:
  std::vector<double> values_;
};

// ---------------------------------------------------------------------------
// Clipping
// ---------------------------------------------------------------------------

/// Scale factor min{1, c/||g||}. Zero vectors and c = +inf give 1.
inline double clip_scale(double g_norm, double c) {
  if (!(g_norm > c)) return 1.0;
  return c / g_norm;
}

/// In-place clipping; returns the scale that was applied.
inline double clip_inplace(std::span<double> g, double c) {
  require(c > 0.0, ErrorKind::invalid_input, "clip: threshold must be positive");
  require(all_finite(g), ErrorKind::invalid_input, "clip: non-finite input");
  const double s = clip_scale(norm(g), c);
  if (s != 1.0) {
    for (double& x : g) x *= s;
  }
  return s;
}

/// min{1, c/||g||_2} * g
inline std::vector<double> clip(std::span<const double> g, double c) {
  std::vector<double> out(g.begin(), g.end());
  clip_inplace(out, c);
  return out;
}

// ---------------------------------------------------------------------------
// Projection region
// ---------------------------------------------------------------------------

/// Axis-aligned box. The unbounded region is a flag rather than infinite
/// bounds so no arithmetic ever sees an Inf.
class BoxRegion {
 public:
  static BoxRegion unbounded(std::size_t dim) {
    BoxRegion r;
    r.dim_ = dim;
    r.bounded_ = false;
    return r;
  }

  static BoxRegion uniform(std::size_t dim, double lower, double upper) {
    return BoxRegion(std::vector<double>(dim, lower), std::vector<double>(dim, upper));
  }

  BoxRegion(std::vector<double> lower, std::vector<double> upper)
      : lower_(std::move(lower)), upper_(std::move(upper)), dim_(lower_.size()), bounded_(true) {
    require(lower_.size() == upper_.size(), ErrorKind::invalid_input,
            "BoxRegion: lower/upper dimension mismatch");
    require(all_finite(lower_) && all_finite(upper_), ErrorKind::invalid_input,
            "BoxRegion: bounds must be finite (use BoxRegion::unbounded)");
    for (std::size_t i = 0; i < dim_; ++i) {
      require(lower_[i] <= upper_[i], ErrorKind::invalid_input,
              "BoxRegion: lower[" + std::to_string(i) + "] > upper[" + std::to_string(i) + "]");
    }
  }

  std::size_t dim() const noexcept { return dim_; }
  bool bounded() const noexcept { return bounded_; }
  std::span<const double> lower() const noexcept { return lower_; }
  std::span<const double> upper() const noexcept { return upper_; }

  bool contains(std::span<const double> x) const {
    if (!bounded_) return true;
    for (std::size_t i = 0; i < dim_; ++i) {
      if (x[i] < lower_[i] || x[i] > upper_[i]) return false;
    }
    return true;
  }

  /// Clamp in place; no-op for the unbounded region.
  void clamp(std::span<double> x) const {
    if (!bounded_) return;
    for (std::size_t i = 0; i < dim_; ++i) x[i] = std::clamp(x[i], lower_[i], upper_[i]);
  }

 private:
  BoxRegion() = default;

  std::vector<double> lower_;
  std::vector<double> upper_;
  std::size_t dim_ = 0;
  bool bounded_ = false;
};

/// Euclidean projection onto the box (coordinate-wise median of lower, x, upper).
inline ParamVector project(const ParamVector& theta, const BoxRegion& region) {
  require(theta.dim() == region.dim(), ErrorKind::invalid_input,
          "project: dimension mismatch (" + std::to_string(theta.dim()) + " vs " +
              std::to_string(region.dim()) + ")");
  ParamVector out = theta;
  region.clamp(out.values());
  return out;
}

// ---------------------------------------------------------------------------
// Step-size schedules
// ---------------------------------------------------------------------------

enum class ScheduleKind { constant, polynomial, theoretical_optimal };

/// Inputs of the privacy-aware optimal constant step; the value itself is
/// computed in privacy.hpp and stored in the schedule.
struct OptimalStepInputs {
  double mu_tilde = 0.0;
  std::uint64_t horizon = 0;
  double clip_c = 0.0;
  double grad_bound = 0.0;
  std::size_t dim = 1;
  double sigma_dp = 0.0;
  double initial_gap_sq = 0.0;
};

class StepSchedule {
 public:
  static StepSchedule constant(double gamma) {
    require(gamma > 0.0 && std::isfinite(gamma), ErrorKind::invalid_input,
            "StepSchedule: constant step must be positive and finite");
    StepSchedule s;
    s.kind_ = ScheduleKind::constant;
    s.gamma_ = gamma;
    return s;
  }

  /// gamma_t = a0 / (a1 + t)
  static StepSchedule polynomial(double a0, double a1) {
    require(a0 > 0.0 && std::isfinite(a0), ErrorKind::invalid_input,
            "StepSchedule: a0 must be positive");
    require(a1 >= 0.0 && std::isfinite(a1), ErrorKind::invalid_input,
            "StepSchedule: a1 must be nonnegative");
    StepSchedule s;
    s.kind_ = ScheduleKind::polynomial;
    s.a0_ = a0;
    s.a1_ = a1;
    return s;
  }

  /// A constant step whose value was derived from `inputs` (see
  /// privacy::optimal_schedule).
  static StepSchedule theoretical_optimal(double gamma, const OptimalStepInputs& inputs) {
    StepSchedule s = constant(gamma);
    s.kind_ = ScheduleKind::theoretical_optimal;
    s.inputs_ = inputs;
    return s;
  }

  ScheduleKind kind() const noexcept { return kind_; }
  double a0() const noexcept { return a0_; }
  double a1() const noexcept { return a1_; }
  const std::optional<OptimalStepInputs>& optimal_inputs() const noexcept { return inputs_; }

  double operator()(std::uint64_t t) const {
    require(t >= 1, ErrorKind::invalid_input, "schedule_value: t must be >= 1");
    if (kind_ == ScheduleKind::polynomial) return a0_ / (a1_ + static_cast<double>(t));
    return gamma_;
  }

  bool is_constant() const noexcept { return kind_ != ScheduleKind::polynomial; }

  std::string describe() const {
    switch (kind_) {
      case ScheduleKind::constant: return "constant(" + std::to_string(gamma_) + ")";
      case ScheduleKind::polynomial:
        return "polynomial(" + std::to_string(a0_) + "," + std::to_string(a1_) + ")";
      case ScheduleKind::theoretical_optimal:
        return "theoretical_optimal(" + std::to_string(gamma_) + ")";
    }
    return "?";
  }

 private:
  StepSchedule() = default;

  ScheduleKind kind_ = ScheduleKind::constant;
  double gamma_ = 0.0;
  double a0_ = 0.0;
  double a1_ = 0.0;
  std::optional<OptimalStepInputs> inputs_;
};

inline double schedule_value(const StepSchedule& s, std::uint64_t t) { return s(t); }

/// prod_{i=1}^{n} (1 - kappa * gamma_i). Polynomial schedules whose factors
/// are all positive use the Gamma-function closed form so long horizons stay
/// O(1); everything else is a direct product.
inline double contraction_product(const StepSchedule& s, double kappa, std::uint64_t n) {
  if (n == 0) return 1.0;
  if (s.is_constant()) {
    const double f = 1.0 - kappa * s(1);
    if (f > 0.0) return std::exp(static_cast<double>(n) * std::log(f));
    return std::pow(f, static_cast<double>(n));
  }
  const double shift = kappa * s.a0();
  const double a1 = s.a1();
  if (a1 + 1.0 - shift > 0.0) {
    // prod (a1 + i - shift)/(a1 + i)
    const double nn = static_cast<double>(n);
    const double logp = std::lgamma(a1 + nn + 1.0 - shift) - std::lgamma(a1 + 1.0 - shift) -
                        std::lgamma(a1 + nn + 1.0) + std::lgamma(a1 + 1.0);
    return std::exp(logp);
  }
  double p = 1.0;
  for (std::uint64_t i = 1; i <= n; ++i) p *= 1.0 - kappa * s(i);
  return p;
}

struct ScheduleReport {
  bool ok = true;
  std::optional<std::uint64_t> first_violation;
  int condition = 0;  ///< 1: ratio condition, 2: magnitude condition
  std::string message;
};

/// Checks, for t <= horizon, the strongly-convex step conditions
///   (i)  gamma_{t-1}/gamma_t <= 1 + (mu_tilde/2) gamma_t   (t >= 2)
///   (ii) gamma_t <= 2/mu_tilde
/// and non-increase. Violations are reported, not thrown.
inline ScheduleReport validate_schedule_scvx(const StepSchedule& s, double mu_tilde,
                                             std::uint64_t horizon) {
  require(mu_tilde > 0.0, ErrorKind::invalid_input, "validate_schedule_scvx: mu_tilde must be > 0");
  ScheduleReport rep;
  double prev = 0.0;
  for (std::uint64_t t = 1; t <= horizon; ++t) {
    const double g = s(t);
    if (g > 2.0 / mu_tilde) {
      rep = {false, t, 2, "gamma_" + std::to_string(t) + " exceeds 2/mu_tilde"};
      return rep;
    }
    if (t >= 2) {
      if (g > prev) {
        rep = {false, t, 1, "schedule increases at t=" + std::to_string(t)};
        return rep;
      }
      if (prev / g > 1.0 + 0.5 * mu_tilde * g) {
        rep = {false, t, 1, "ratio condition fails at t=" + std::to_string(t)};
        return rep;
      }
    }
    prev = g;
    // Constant schedules satisfy (i) trivially and (ii) uniformly after t=1.
    if (s.is_constant()) break;
  }
  return rep;
}

}  // namespace ppclip

#pragma once

#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "ppclip/core.hpp"
#include "ppclip/errors.hpp"

namespace ppclip {

// Every constant is supplied by the caller (or measured by the harness);
// nothing here invents a default for a physical constant.

// ---------------------------------------------------------------------------
// Strongly convex, PCSGD
// ---------------------------------------------------------------------------

struct ScvxBoundParams {
  double mu_tilde = 0.0;  ///< mu - L beta
  double c = 0.0;
  double G = 0.0;
  std::size_t d = 1;
  double sigma_dp = 0.0;
  double initial_gap_sq = 0.0;  ///< ||theta_0 - theta_PS||^2
  StepSchedule schedule = StepSchedule::constant(1.0);

  /// 2(c^2 + G^2) + d sigma^2
  double c1() const { return 2.0 * (c * c + G * G) + static_cast<double>(d) * sigma_dp * sigma_dp; }
  /// max{G - c, 0}^2
  double C1() const {
    const double e = std::max(G - c, 0.0);
    return e * e;
  }

  void validate() const {
    require(mu_tilde > 0.0 && std::isfinite(mu_tilde), ErrorKind::precondition,
            "scvx bound: mu_tilde must be positive (requires beta < mu/L)");
    require(c > 0.0 && G >= 0.0 && sigma_dp >= 0.0 && initial_gap_sq >= 0.0, ErrorKind::precondition,
            "scvx bound: c > 0 and G, sigma_dp, initial gap >= 0 required");
  }
};

/// 8 C1 / mu_tilde^2
inline double bias_upper_scvx(const ScvxBoundParams& p) {
  require(p.mu_tilde > 0.0, ErrorKind::precondition, "bias_upper_scvx: mu_tilde must be positive");
  return 8.0 * p.C1() / (p.mu_tilde * p.mu_tilde);
}

/// Precomputed evaluator: validates the schedule once up to `horizon` + 1,
/// then evaluates
///   prod_{i<=t+1}(1 - mu_tilde gamma_i) gap0 + (2 c1/mu_tilde) gamma_{t+1} + 8 C1/mu_tilde^2
/// in O(1) per t.
class PcsgdScvxBound {
 public:
  PcsgdScvxBound(ScvxBoundParams p, std::uint64_t horizon) : p_(std::move(p)), horizon_(horizon) {
    p_.validate();
    const auto rep = validate_schedule_scvx(p_.schedule, p_.mu_tilde, horizon + 1);
    if (!rep.ok) throw Error(ErrorKind::precondition, "pcsgd_scvx_rhs: invalid schedule: " + rep.message);
  }

  double operator()(std::uint64_t t) const {
    require(t <= horizon_, ErrorKind::precondition, "pcsgd_scvx_rhs: t beyond validated horizon");
    const double prod = contraction_product(p_.schedule, p_.mu_tilde, t + 1);
    return prod * p_.initial_gap_sq + 2.0 * p_.c1() / p_.mu_tilde * p_.schedule(t + 1) + bias_upper_scvx(p_);
  }

  const ScvxBoundParams& params() const noexcept { return p_; }

 private:
  ScvxBoundParams p_;
  std::uint64_t horizon_;
};

inline double pcsgd_scvx_rhs(const ScvxBoundParams& p, std::uint64_t t) { return PcsgdScvxBound(p, t)(t); }

// ---------------------------------------------------------------------------
// Non-convex, PCSGD
// ---------------------------------------------------------------------------

struct NcvxBoundParams {
  double delta0 = 0.0;  ///< initial optimality gap
  double L = 0.0;
  double sigma0 = 0.0;
  double sigma1 = 0.0;
  double ell_max = 0.0;
  double beta = 0.0;
  double c = 0.0;
  double G = 0.0;
  std::size_t d = 1;
  double sigma_dp = 0.0;
  StepSchedule schedule = StepSchedule::constant(1.0);

  void validate() const {
    for (double v : {delta0, L, sigma0, sigma1, ell_max, beta, G, sigma_dp}) {
      require(v >= 0.0 && std::isfinite(v), ErrorKind::precondition, "ncvx bound: constants must be nonnegative");
    }
    require(c > 0.0, ErrorKind::precondition, "ncvx bound: c must be positive");
  }
};

/// b(beta, c) = l_max beta (sqrt(sigma0^2 + sigma_dp^2) + 8 (1 + sigma1^2) l_max beta) + 2 max{G - c, 0}^2
inline double pcsgd_ncvx_b(const NcvxBoundParams& p) {
  const double clip_gap = std::max(p.G - p.c, 0.0);
  const double s = std::sqrt(p.sigma0 * p.sigma0 + p.sigma_dp * p.sigma_dp);
  return p.ell_max * p.beta * (s + 8.0 * (1.0 + p.sigma1 * p.sigma1) * p.ell_max * p.beta) +
         2.0 * clip_gap * clip_gap;
}

namespace detail {

inline void check_pcsgd_ncvx_steps(const NcvxBoundParams& p, std::uint64_t T) {
  const double cap = 1.0 / (2.0 * (1.0 + p.sigma1 * p.sigma1));
  // schedules are non-increasing, so gamma_1 is the largest step
  if (p.schedule(1) > cap) {
    std::ostringstream os;
    os << "pcsgd_ncvx_rhs: step condition gamma_t <= 1/(2(1+sigma1^2)) = " << cap << " violated (gamma_1 = "
       << p.schedule(1) << ")";
    throw Error(ErrorKind::precondition, os.str());
  }
  (void)T;
}

}  // namespace detail

/// Right side of the summed inequality
///   sum_t gamma_{t+1} E||grad f(theta_t; theta_t)||^2
///     <= 8 Delta0 + 4 L (sigma0^2 + sigma_dp^2) sum gamma^2 + 8 b sum gamma.
inline double pcsgd_ncvx_sum_rhs(const NcvxBoundParams& p, std::uint64_t T) {
  p.validate();
  require(T >= 1, ErrorKind::precondition, "pcsgd_ncvx_rhs: T must be >= 1");
  detail::check_pcsgd_ncvx_steps(p, T);
  double s1 = 0.0, s2 = 0.0;
  if (p.schedule.is_constant()) {
    const double g = p.schedule(1);
    s1 = static_cast<double>(T) * g;
    s2 = static_cast<double>(T) * g * g;
  } else {
    for (std::uint64_t t = 1; t <= T; ++t) {
      const double g = p.schedule(t);
      s1 += g;
      s2 += g * g;
    }
  }
  const double var = p.sigma0 * p.sigma0 + p.sigma_dp * p.sigma_dp;
  return 8.0 * p.delta0 + 4.0 * p.L * var * s2 + 8.0 * pcsgd_ncvx_b(p) * s1;
}

/// Bound on min_{t<T} E||grad f(theta_t; theta_t)||^2: the summed bound
/// divided by sum gamma.
inline double pcsgd_ncvx_rhs(const NcvxBoundParams& p, std::uint64_t T) {
  double s1 = 0.0;
  if (p.schedule.is_constant()) {
    s1 = static_cast<double>(T) * p.schedule(1);
  } else {
    for (std::uint64_t t = 1; t <= T; ++t) s1 += p.schedule(t);
  }
  return pcsgd_ncvx_sum_rhs(p, T) / s1;
}

/// gamma = 1/sqrt(T): 8 (Delta0 + L (sigma0^2 + sigma_dp^2)/2) / sqrt(T) + 8 b
inline double pcsgd_ncvx_rhs_sqrt_t(NcvxBoundParams p, std::uint64_t T) {
  p.schedule = StepSchedule::constant(1.0 / std::sqrt(static_cast<double>(T)));
  p.validate();
  detail::check_pcsgd_ncvx_steps(p, T);
  const double var = p.sigma0 * p.sigma0 + p.sigma_dp * p.sigma_dp;
  return 8.0 * (p.delta0 + 0.5 * p.L * var) / std::sqrt(static_cast<double>(T)) + 8.0 * pcsgd_ncvx_b(p);
}

// ---------------------------------------------------------------------------
// Strongly convex, DiceSGD
// ---------------------------------------------------------------------------

struct DiceScvxParams {
  double mu_tilde = 0.0;
  double G = 0.0;  ///< E||grad l||^2 <= G^2 + B^2 ||theta - theta_PS||^2
  double B = 0.0;
  std::size_t d = 1;
  double sigma_dp = 0.0;  ///< standard deviation of the noise actually injected
  double L = 0.0;
  double M = 0.0;  ///< bound on ||e_t||
  double beta = 0.0;
  double b = 0.0;      ///< step constant of condition (i)-(ii)
  double b_bar = 0.0;  ///< step constant of condition (iii)
  double initial_sq = 0.0;  ///< ||theta_0 - gamma_0 e_0 - theta_PS||^2
  double a0 = 1.0;
  double a1 = 0.0;

  StepSchedule schedule() const { return StepSchedule::polynomial(a0, a1); }
};

struct DiceScvxCheck {
  bool ok = true;
  std::vector<std::string> failures;  ///< which of (i), (ii), (iii) failed

  std::string summary() const {
    std::string s;
    for (const auto& f : failures) s += (s.empty() ? "" : "; ") + f;
    return s;
  }
};

/// Checks (i) a0 >= 1/b, (ii) gamma_t <= min{mu_tilde/(16 b), 8/mu_tilde, mu_tilde/(4 B^2)},
/// (iii) gamma_t^2 / gamma_{t+1}^2 <= 1 + b_bar gamma_{t+1}^2 for t < horizon.
inline DiceScvxCheck check_dice_scvx_conditions(const DiceScvxParams& p, std::uint64_t horizon) {
  DiceScvxCheck r;
  if (!(p.b > 0.0 && p.a0 >= 1.0 / p.b)) {
    r.ok = false;
    r.failures.push_back("(i) a0 >= 1/b");
  }
  double cap = 8.0 / p.mu_tilde;
  if (p.b > 0.0) cap = std::min(cap, p.mu_tilde / (16.0 * p.b));
  if (p.B > 0.0) cap = std::min(cap, p.mu_tilde / (4.0 * p.B * p.B));
  const StepSchedule s = p.schedule();
  if (s(1) > cap) {
    r.ok = false;
    r.failures.push_back("(ii) gamma_t <= min{mu~/(16b), 8/mu~, mu~/(4B^2)}");
  }
  // The ratio gap (gamma_t/gamma_{t+1})^2 - 1 shrinks like 2/t while
  // b_bar gamma_{t+1}^2 shrinks like 1/t^2, so the binding t is the last one.
  for (std::uint64_t t : {std::uint64_t{1}, horizon}) {
    // gamma_t^2/gamma_{t+1}^2 - 1 = (2u + 1)/u^2 with u = a1 + t, written
    // without the cancellation that swamps it at large t
    const double u = p.a1 + static_cast<double>(t), gn = s(t + 1);
    if ((2.0 * u + 1.0) / (u * u) > p.b_bar * gn * gn) {
      r.ok = false;
      r.failures.push_back("(iii) gamma_t^2/gamma_{t+1}^2 <= 1 + b_bar gamma_{t+1}^2 (fails at t=" +
                           std::to_string(t) + ")");
      break;
    }
  }
  return r;
}

/// Smallest b_bar satisfying (iii) up to `horizon` for gamma_t = a0/(a1 + t).
inline double dice_scvx_min_b_bar(double a0, double a1, std::uint64_t horizon) {
  double need = 0.0;
  for (std::uint64_t t : {std::uint64_t{1}, horizon}) {
    const double u = a1 + static_cast<double>(t);
    const double gn = a0 / (u + 1.0);
    need = std::max(need, (2.0 * u + 1.0) / (u * u) / (gn * gn));
  }
  // nudged up so the floating-point check in check_dice_scvx_conditions passes
  return need * (1.0 + 1e-9);
}

/// prod_{i<=t+1}(1 - mu~ gamma_i/4) ||theta_bar_0||^2 + 8 (G^2 + d sigma^2)/mu~ gamma
///   + 16 L^2 M^2 (1+beta)^2/mu~^2 gamma^2 + 24 b^2 M^2/mu~ gamma^3
///   + 16 L^2 M^2 b_bar (1+beta)^2/mu~^2 gamma^4,  gamma = gamma_{t+1}.
class DiceScvxBound {
 public:
  DiceScvxBound(DiceScvxParams p, std::uint64_t horizon) : p_(p), s_(p.schedule()), horizon_(horizon) {
    require(p_.mu_tilde > 0.0, ErrorKind::precondition, "dice_scvx_rhs: mu_tilde must be positive");
    for (double v : {p_.G, p_.B, p_.sigma_dp, p_.L, p_.M, p_.beta, p_.b_bar, p_.initial_sq}) {
      require(v >= 0.0 && std::isfinite(v), ErrorKind::precondition, "dice_scvx_rhs: constants must be nonnegative");
    }
    const auto chk = check_dice_scvx_conditions(p_, horizon + 1);
    if (!chk.ok) throw Error(ErrorKind::precondition, "dice_scvx_rhs: step conditions failed: " + chk.summary());
  }

  double operator()(std::uint64_t t) const {
    require(t <= horizon_, ErrorKind::precondition, "dice_scvx_rhs: t beyond validated horizon");
    const double mt = p_.mu_tilde;
    const double g = s_(t + 1);
    const double lm = p_.L * p_.L * p_.M * p_.M * (1.0 + p_.beta) * (1.0 + p_.beta);
    const double prod = contraction_product(s_, mt / 4.0, t + 1);
    return prod * p_.initial_sq + leading_term(t) + 16.0 * lm / (mt * mt) * g * g +
           24.0 * p_.b * p_.b * p_.M * p_.M / mt * g * g * g + 16.0 * lm * p_.b_bar / (mt * mt) * g * g * g * g;
  }

  /// 8 (G^2 + d sigma^2)/mu~ gamma_{t+1}: the asymptotically dominant term.
  double leading_term(std::uint64_t t) const {
    return 8.0 * (p_.G * p_.G + static_cast<double>(p_.d) * p_.sigma_dp * p_.sigma_dp) / p_.mu_tilde * s_(t + 1);
  }

 private:
  DiceScvxParams p_;
  StepSchedule s_;
  std::uint64_t horizon_;
};

inline double dice_scvx_rhs(const DiceScvxParams& p, std::uint64_t t) { return DiceScvxBound(p, t)(t); }

// ---------------------------------------------------------------------------
// Non-convex, DiceSGD
// ---------------------------------------------------------------------------

struct DiceNcvxParams {
  double C1 = 0.0;
  double C2 = 0.0;
  double sigma_dp = 0.0;  ///< standard deviation of the noise actually injected
  double ell_max = 0.0;
  double beta = 0.0;
  std::size_t d = 1;
  double delta0 = 0.0;
  double L = 0.0;
  double sigma0 = 0.0;
  double sigma1 = 0.0;
  double M = 0.0;
};

/// b = 4 l_max (C1 + C2 + sqrt(d) sigma_dp)
inline double dice_ncvx_b(const DiceNcvxParams& p) {
  return 4.0 * p.ell_max * (p.C1 + p.C2 + std::sqrt(static_cast<double>(p.d)) * p.sigma_dp);
}

/// With gamma = 1/sqrt(T):
///   4 Delta0/(T gamma) + b beta + 2 L gamma (sigma_dp^2 + sigma0^2) + 2 L^2 M^2 gamma^2
inline double dice_ncvx_rhs(const DiceNcvxParams& p, std::uint64_t T) {
  for (double v : {p.C1, p.C2, p.sigma_dp, p.ell_max, p.beta, p.delta0, p.L, p.sigma0, p.sigma1, p.M}) {
    require(v >= 0.0 && std::isfinite(v), ErrorKind::precondition, "dice_ncvx_rhs: constants must be nonnegative");
  }
  require(T >= 1, ErrorKind::precondition, "dice_ncvx_rhs: T must be >= 1");
  const double Td = static_cast<double>(T);
  const double gamma = 1.0 / std::sqrt(Td);
  if (p.L > 0.0 && gamma > 1.0 / (2.0 * p.L * (1.0 + p.sigma1 * p.sigma1))) {
    throw Error(ErrorKind::precondition, "dice_ncvx_rhs: step condition gamma <= 1/(2L(1+sigma1^2)) violated");
  }
  return 4.0 * p.delta0 / (Td * gamma) + dice_ncvx_b(p) * p.beta +
         2.0 * p.L * gamma * (p.sigma_dp * p.sigma_dp + p.sigma0 * p.sigma0) + 2.0 * p.L * p.L * p.M * p.M * gamma * gamma;
}

}  // namespace ppclip

#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ppclip/core.hpp"
#include "ppclip/distributions.hpp"
#include "ppclip/losses.hpp"
#include "ppclip/random.hpp"

namespace ppclip {

// ---------------------------------------------------------------------------
// Closed forms for the scalar quadratic / Bernoulli instance
//   l = (theta + a z)^2 / 2,  Z = b Bern(p) - beta theta
// so grad l = (1 - a beta) theta + a b Bern(p).
// ---------------------------------------------------------------------------

struct QuadraticInstance {
  double p = 0.1;
  double a = 10.0;
  double b = 1.0;
  double beta = 0.01;
  double c = 1.0;

  double contraction() const { return 1.0 - a * beta; }

  void check_well_posed() const {
    require(p > 0.0 && p < 0.5, ErrorKind::precondition, "quadratic instance: p must lie in (0, 1/2)");
    require(a > 0.0, ErrorKind::precondition, "quadratic instance: a must be positive");
    require(beta >= 0.0, ErrorKind::precondition, "quadratic instance: beta must be nonnegative");
    require(a * beta < 1.0, ErrorKind::precondition, "quadratic instance: ill-posed, a*beta >= 1");
  }

  void check_clipped() const {
    check_well_posed();
    require(c > 0.0, ErrorKind::precondition, "quadratic instance: c must be positive");
    if (a * b < 2.0 * c) {
      std::ostringstream os;
      os << "quadratic instance: requires a*b >= 2c (a*b=" << a * b << ", 2c=" << 2.0 * c << ")";
      throw Error(ErrorKind::precondition, os.str());
    }
  }
};

/// -p a b / (1 - a beta)
inline double theta_ps_quadratic(const QuadraticInstance& q) {
  q.check_well_posed();
  return -q.p * q.a * q.b / q.contraction();
}

/// Same, with the empirical success frequency of a finite sample in place of p.
inline double theta_ps_quadratic_sample(const QuadraticInstance& q, double p_bar) {
  q.check_well_posed();
  return -p_bar * q.a * q.b / q.contraction();
}

/// -p c / ((1 - p)(1 - a beta)): the zero of E[clip_c(grad)] when only the
/// "z~ = 1" gradient is clipped.
inline double theta_inf_quadratic(const QuadraticInstance& q) {
  q.check_clipped();
  return -q.p * q.c / ((1.0 - q.p) * q.contraction());
}

/// p^2 / (1 - a beta)^2 * (a b - c/(1 - p))^2
inline double quadratic_bias(const QuadraticInstance& q) {
  q.check_clipped();
  const double k = q.p / q.contraction();
  const double inner = q.a * q.b - q.c / (1.0 - q.p);
  return k * k * inner * inner;
}

/// sup over theta in [lo, hi], z~ in {0, 1} of |(1 - a beta) theta + a b z~|,
/// attained at the box corners.
inline double quadratic_grad_bound(const QuadraticInstance& q, double lo, double hi) {
  const double k = q.contraction();
  double g = 0.0;
  for (double th : {lo, hi}) {
    for (double zt : {0.0, 1.0}) g = std::max(g, std::abs(k * th + q.a * q.b * zt));
  }
  return g;
}

inline LossPtr make_loss(const QuadraticInstance& q) { return quadratic_scalar_loss(q.a); }

inline DistributionPtr make_distribution(const QuadraticInstance& q) {
  return bernoulli_linear_shift(q.p, q.b, q.beta);
}

// ---------------------------------------------------------------------------
// Expectation helper: exact when the support is enumerable, otherwise a
// fixed-size sample average with a dedicated stream.
// ---------------------------------------------------------------------------

struct ExpectationOptions {
  std::size_t saa_samples = 100000;
  std::uint64_t seed = 2024;
};

namespace detail {

/// E_{Z ~ D(theta_dist)} clip_c(grad l(theta; Z)); `draw` indexes the SAA stream.
inline std::vector<double> expected_grad_any(const DecisionDistribution& dist, const LossModel& loss,
                                             std::span<const double> theta, std::span<const double> theta_dist,
                                             double c, const ExpectationOptions& opt, std::uint64_t draw) {
  std::vector<double> acc(loss.dim(), 0.0), g(loss.dim());
  if (auto sup = dist.support(theta_dist)) {
    for (const auto& [z, p] : *sup) {
      loss.grad(theta, z, g);
      axpy(p * clip_scale(norm(g), c), g, acc);
    }
    return acc;
  }
  require(opt.saa_samples >= 1, ErrorKind::config, "oracle: saa_samples must be >= 1");
  RandomStream rng(opt.seed, 0, stream_tag::oracle);
  rng.seek_step(draw);
  Sample z;
  const double w = 1.0 / static_cast<double>(opt.saa_samples);
  for (std::size_t n = 0; n < opt.saa_samples; ++n) {
    dist.sample(theta_dist, rng, z);
    loss.grad(theta, z, g);
    axpy(w * clip_scale(norm(g), c), g, acc);
  }
  return acc;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Repeated risk minimisation
// ---------------------------------------------------------------------------

struct RrmOptions {
  double tol = 1e-8;
  std::size_t max_outer = 500;
  std::size_t max_inner = 200000;
  std::optional<ParamVector> theta0;
  ExpectationOptions expectation;
};

struct RrmResult {
  ParamVector theta;
  std::size_t outer_iterations = 0;
  std::vector<double> gaps;  ///< ||theta_{k+1} - theta_k|| per outer step
  double residual = 0.0;     ///< ||grad f(theta; theta)||
};

namespace detail {

/// Frozen-distribution objective for one RRM step. Holds either the
/// enumerated support or a fixed sample so each inner solve is deterministic.
class FrozenObjective {
 public:
  FrozenObjective(const DecisionDistribution& dist, const LossModel& loss, std::span<const double> theta_dist,
                  const ExpectationOptions& opt, std::uint64_t draw)
      : loss_(loss) {
    if (auto sup = dist.support(theta_dist)) {
      points_ = std::move(*sup);
      return;
    }
    RandomStream rng(opt.seed, 0, stream_tag::oracle);
    rng.seek_step(draw);
    points_.resize(opt.saa_samples);
    const double w = 1.0 / static_cast<double>(opt.saa_samples);
    for (auto& ws : points_) {
      dist.sample(theta_dist, rng, ws.z);
      ws.prob = w;
    }
  }

  void grad(std::span<const double> theta, std::span<double> out) const {
    std::fill(out.begin(), out.end(), 0.0);
    thread_local std::vector<double> g;
    g.resize(out.size());
    for (const auto& [z, p] : points_) {
      loss_.grad(theta, z, g);
      axpy(p, g, out);
    }
  }

 private:
  const LossModel& loss_;
  Support points_;
};

/// Accelerated full-gradient descent with step 1/smoothness and
/// gradient-based momentum restart; stops at ||grad|| <= tol.
inline std::vector<double> minimize_frozen(const FrozenObjective& f, std::vector<double> x, double smoothness,
                                           double tol, std::size_t max_iter) {
  const std::size_t d = x.size();
  const double step = 1.0 / smoothness;
  std::vector<double> y = x, x_prev = x, g(d);
  double k = 1.0;
  for (std::size_t it = 0; it < max_iter; ++it) {
    f.grad(y, g);
    if (norm(g) <= tol) return y;
    x_prev = x;
    for (std::size_t i = 0; i < d; ++i) x[i] = y[i] - step * g[i];
    // restart when the momentum direction opposes descent
    double align = 0.0;
    for (std::size_t i = 0; i < d; ++i) align += g[i] * (x[i] - x_prev[i]);
    if (align > 0.0) {
      k = 1.0;
      y = x;
      continue;
    }
    const double k_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * k * k));
    const double mom = (k - 1.0) / k_next;
    for (std::size_t i = 0; i < d; ++i) y[i] = x[i] + mom * (x[i] - x_prev[i]);
    k = k_next;
  }
  f.grad(x, g);
  if (norm(g) <= tol) return x;
  std::ostringstream os;
  os << "solve_ps_rrm: inner solver stalled, gradient norm " << norm(g);
  throw Error(ErrorKind::non_convergence, os.str());
}

}  // namespace detail

/// theta_{k+1} = argmin_theta E_{Z ~ D(theta_k)} l(theta; Z), iterated to a
/// fixed point. Stops when both the step and the a-posteriori error estimate
/// gap * rho / (1 - rho) (rho = ratio of consecutive gaps) are below tol.
inline RrmResult solve_ps_rrm(const LossModel& loss, const DecisionDistribution& dist, RrmOptions opt = {}) {
  require(loss.constants().mu > 0.0, ErrorKind::precondition, "solve_ps_rrm: loss must be strongly convex");
  require(opt.tol > 0.0, ErrorKind::invalid_input, "solve_ps_rrm: tol must be positive");
  const double smooth = std::max(loss.constants().smoothness, loss.constants().mu);
  RrmResult res;
  res.theta = opt.theta0 ? *opt.theta0 : ParamVector(loss.dim());
  require(res.theta.dim() == loss.dim(), ErrorKind::invalid_input, "solve_ps_rrm: theta0 dimension mismatch");
  std::vector<double> cur = res.theta.vec();
  for (std::size_t k = 0; k < opt.max_outer; ++k) {
    // one draw index for every outer step: common random numbers keep the
    // SAA map deterministic in theta, so the outer iteration can converge
    detail::FrozenObjective f(dist, loss, cur, opt.expectation, 1);
    std::vector<double> next = detail::minimize_frozen(f, cur, smooth, opt.tol / 10.0, opt.max_inner);
    const double gap = std::sqrt(distance_sq(next, cur));
    res.gaps.push_back(gap);
    cur = std::move(next);
    res.outer_iterations = k + 1;
    if (!all_finite(cur)) throw Error(ErrorKind::non_convergence, "solve_ps_rrm: iterate became non-finite");
    if (gap <= opt.tol) {
      double bound = 0.0;
      if (res.gaps.size() >= 2 && res.gaps[res.gaps.size() - 2] > 0.0) {
        const double rho = gap / res.gaps[res.gaps.size() - 2];
        bound = rho < 1.0 ? gap * rho / (1.0 - rho) : kInf;
      }
      if (bound <= opt.tol || gap == 0.0) break;
    }
    if (k + 1 == opt.max_outer) {
      std::ostringstream os;
      os << "solve_ps_rrm: no convergence after " << opt.max_outer << " outer iterations (last gap " << gap
         << "); expected when beta >= mu/L";
      throw Error(ErrorKind::non_convergence, os.str());
    }
  }
  res.theta = ParamVector(cur);
  res.residual = norm(detail::expected_grad_any(dist, loss, cur, cur, kInf, opt.expectation, 0));
  return res;
}

// ---------------------------------------------------------------------------
// Clipped fixed point E_{Z ~ D(theta)}[clip_c(grad l(theta; Z))] = 0
// ---------------------------------------------------------------------------

struct FixedPointOptions {
  double tol = 1e-12;
  std::size_t max_iter = 1000000;
  double initial_radius = 1.0;
  std::optional<ParamVector> theta0;
  ExpectationOptions expectation;
};

struct FixedPointResult {
  ParamVector theta;
  double residual = 0.0;
  std::size_t iterations = 0;
};

/// Scalar map h(theta) = E_{Z ~ D(theta)} clip_c(grad l(theta; Z)).
inline std::vector<double> clipped_field(const LossModel& loss, const DecisionDistribution& dist,
                                         std::span<const double> theta, double c,
                                         const ExpectationOptions& opt = {}) {
  return detail::expected_grad_any(dist, loss, theta, theta, c, opt, 0);
}

/// d = 1 with enumerable support: bisection on h (increasing for the
/// Bernoulli family) to machine resolution. Otherwise damped iteration
/// theta <- theta - h(theta) / (2L).
inline FixedPointResult solve_clipped_fixed_point(const LossModel& loss, const DecisionDistribution& dist,
                                                  double c, FixedPointOptions opt = {}) {
  require(c > 0.0, ErrorKind::invalid_input, "solve_clipped_fixed_point: c must be positive");
  FixedPointResult res;
  const std::size_t d = loss.dim();
  ParamVector start = opt.theta0 ? *opt.theta0 : ParamVector(d);

  if (d == 1 && dist.support(start.values())) {
    auto h = [&](double th) {
      const double v[1] = {th};
      return clipped_field(loss, dist, v, c, opt.expectation)[0];
    };
    const double mid0 = start[0];
    double r = opt.initial_radius;
    double lo = mid0 - r, hi = mid0 + r;
    double hlo = h(lo), hhi = h(hi);
    int expand = 0;
    while (!(hlo <= 0.0 && hhi >= 0.0)) {
      if (++expand > 80) {
        throw Error(ErrorKind::non_convergence, "solve_clipped_fixed_point: could not bracket a root");
      }
      r *= 2.0;
      lo = mid0 - r;
      hi = mid0 + r;
      hlo = h(lo);
      hhi = h(hi);
    }
    std::size_t it = 0;
    while (it < 2000) {
      ++it;
      const double mid = 0.5 * (lo + hi);
      if (mid <= lo || mid >= hi) break;  // adjacent doubles
      const double hm = h(mid);
      if (hm == 0.0) {
        lo = hi = mid;
        break;
      }
      (hm < 0.0 ? lo : hi) = mid;
    }
    const double root = std::abs(h(lo)) <= std::abs(h(hi)) ? lo : hi;
    res.theta = ParamVector{root};
    res.residual = std::abs(h(root));
    res.iterations = it;
    if (res.residual > opt.tol) {
      std::ostringstream os;
      os << "solve_clipped_fixed_point: bisection residual " << res.residual << " above tol";
      throw Error(ErrorKind::non_convergence, os.str());
    }
    return res;
  }

  const double L = std::max(loss.constants().lipschitz, loss.constants().smoothness);
  require(L > 0.0, ErrorKind::precondition, "solve_clipped_fixed_point: loss declares no Lipschitz constant");
  const double eta = 1.0 / (2.0 * L);
  std::vector<double> th = start.vec();
  double resid = kInf;
  for (std::size_t it = 0; it < opt.max_iter; ++it) {
    const auto hv = clipped_field(loss, dist, th, c, opt.expectation);
    resid = norm(hv);
    res.iterations = it;
    if (resid <= opt.tol) break;
    axpy(-eta, hv, th);
    if (!all_finite(th)) throw Error(ErrorKind::non_convergence, "solve_clipped_fixed_point: iterate diverged");
  }
  if (!(resid <= opt.tol)) {
    std::ostringstream os;
    os << "solve_clipped_fixed_point: stalled with residual " << resid;
    throw Error(ErrorKind::non_convergence, os.str());
  }
  res.theta = ParamVector(th);
  res.residual = resid;
  return res;
}

}  // namespace ppclip

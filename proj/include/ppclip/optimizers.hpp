#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ppclip/core.hpp"
#include "ppclip/distributions.hpp"
#include "ppclip/losses.hpp"
#include "ppclip/random.hpp"

namespace ppclip {

enum class Algorithm { sgd, pcsgd, dicesgd };

inline std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::sgd: return "sgd";
    case Algorithm::pcsgd: return "pcsgd";
    case Algorithm::dicesgd: return "dicesgd";
  }
  return "?";
}

inline Algorithm parse_algorithm(const std::string& s) {
  if (s == "sgd") return Algorithm::sgd;
  if (s == "pcsgd") return Algorithm::pcsgd;
  if (s == "dicesgd") return Algorithm::dicesgd;
  throw Error(ErrorKind::config, "unknown algorithm '" + s + "' (expected sgd, pcsgd or dicesgd)");
}

/// Iterates whose norm exceeds this are declared divergent.
inline constexpr double kDivergenceNorm = 1e12;

/// Default DiceSGD noise multiplier (sqrt(96)), matching the privacy
/// accounting of the doubly clipped method.
inline const double kDiceDpMultiplier = std::sqrt(96.0);

struct OptimizerConfig {
  StepSchedule schedule = StepSchedule::constant(0.01);
  double clip_c = kInf;   ///< PCSGD threshold
  double clip_c1 = 1.0;   ///< DiceSGD gradient threshold
  double clip_c2 = 1.0;   ///< DiceSGD error threshold, C2 >= C1
  double sigma_dp = 0.0;
  double dp_multiplier = kDiceDpMultiplier;
  std::optional<BoxRegion> region;  ///< empty: unconstrained

  void validate() const {
    require(clip_c > 0.0, ErrorKind::invalid_input, "optimizer: clip threshold c must be positive");
    require(clip_c1 > 0.0 && clip_c2 >= clip_c1, ErrorKind::invalid_input,
            "optimizer: DiceSGD needs 0 < C1 <= C2");
    require(sigma_dp >= 0.0 && std::isfinite(sigma_dp), ErrorKind::invalid_input,
            "optimizer: sigma_dp must be nonnegative");
    require(dp_multiplier > 0.0, ErrorKind::invalid_input, "optimizer: dp_multiplier must be positive");
  }

  bool bounded() const { return region && region->bounded(); }
};

struct PcsgdState {
  ParamVector theta;
  std::uint64_t t = 0;
};

struct DicesgdState {
  ParamVector theta;
  std::vector<double> e;  ///< clipping-error accumulator
  std::uint64_t t = 0;

  static DicesgdState start(ParamVector theta0) {
    DicesgdState s{std::move(theta0), {}, 0};
    s.e.assign(s.theta.dim(), 0.0);
    return s;
  }
};

/// Scratch buffers reused across steps; after a step `grad` holds the raw
/// stochastic gradient and `update` the applied direction (before noise).
struct StepWorkspace {
  Sample z;
  std::vector<double> grad;
  std::vector<double> update;
  std::vector<double> scratch;

  void resize(std::size_t d) {
    grad.resize(d);
    update.resize(d);
    scratch.resize(d);
  }
};

namespace detail {

inline void check_gradient(std::span<const double> g, std::uint64_t step) {
  if (!all_finite(g)) throw NumericalError("non-finite stochastic gradient", step);
}

inline void check_iterate(const ParamVector& theta, std::uint64_t step) {
  if (!theta.is_finite()) throw NumericalError("non-finite iterate", step);
  if (norm(theta.values()) > kDivergenceNorm) throw NumericalError("iterate diverged (norm > 1e12)", step);
}

/// Shared body of SGD and PCSGD: greedy deployment, clip, noise, project.
inline void projected_clipped_step(PcsgdState& state, double c, const OptimizerConfig& cfg,
                                   const LossModel& loss, const DecisionDistribution& dist,
                                   RandomStream& rng, StepWorkspace& ws) {
  const std::uint64_t next = state.t + 1;
  const std::size_t d = state.theta.dim();
  ws.resize(d);
  rng.seek_step(next);
  dist.sample(state.theta.values(), rng, ws.z);
  loss.grad(state.theta.values(), ws.z, ws.grad);
  check_gradient(ws.grad, next);
  const double s = clip_scale(norm(ws.grad), c);
  const double gamma = cfg.schedule(next);
  auto theta = state.theta.values();
  for (std::size_t i = 0; i < d; ++i) ws.update[i] = s * ws.grad[i];
  if (cfg.sigma_dp > 0.0) {
    for (std::size_t i = 0; i < d; ++i) theta[i] -= gamma * (ws.update[i] + cfg.sigma_dp * rng.normal());
  } else {
    for (std::size_t i = 0; i < d; ++i) theta[i] -= gamma * ws.update[i];
  }
  if (cfg.region) cfg.region->clamp(theta);
  state.t = next;
  check_iterate(state.theta, next);
}

}  // namespace detail

/// theta <- P_X(theta - gamma_{t+1} (clip_c(grad l(theta; Z)) + zeta)),
/// Z ~ D(theta), zeta ~ N(0, sigma_dp^2 I).
inline void pcsgd_step(PcsgdState& state, const OptimizerConfig& cfg, const LossModel& loss,
                       const DecisionDistribution& dist, RandomStream& rng, StepWorkspace& ws) {
  detail::projected_clipped_step(state, cfg.clip_c, cfg, loss, dist, rng, ws);
}

/// Projected SGD: PCSGD with clipping disabled.
inline void sgd_step(PcsgdState& state, const OptimizerConfig& cfg, const LossModel& loss,
                     const DecisionDistribution& dist, RandomStream& rng, StepWorkspace& ws) {
  detail::projected_clipped_step(state, kInf, cfg, loss, dist, rng, ws);
}

/// One DiceSGD iteration (unconstrained):
///   v = clip_C1(g) + clip_C2(e),  theta <- theta - gamma (v + zeta),
///   e <- e + g - v,  zeta ~ N(0, (dp_multiplier * sigma_dp)^2 I).
inline void dicesgd_step(DicesgdState& state, const OptimizerConfig& cfg, const LossModel& loss,
                         const DecisionDistribution& dist, RandomStream& rng, StepWorkspace& ws) {
  if (cfg.bounded()) {
    throw Error(ErrorKind::unsupported, "dicesgd: only the unconstrained setting is supported");
  }
  const std::uint64_t next = state.t + 1;
  const std::size_t d = state.theta.dim();
  ws.resize(d);
  rng.seek_step(next);
  dist.sample(state.theta.values(), rng, ws.z);
  loss.grad(state.theta.values(), ws.z, ws.grad);
  detail::check_gradient(ws.grad, next);
  const double sg = clip_scale(norm(ws.grad), cfg.clip_c1);
  const double se = clip_scale(norm(state.e), cfg.clip_c2);
  for (std::size_t i = 0; i < d; ++i) ws.update[i] = sg * ws.grad[i] + se * state.e[i];
  const double gamma = cfg.schedule(next);
  const double noise_sd = cfg.dp_multiplier * cfg.sigma_dp;
  auto theta = state.theta.values();
  if (cfg.sigma_dp > 0.0) {
    for (std::size_t i = 0; i < d; ++i) theta[i] -= gamma * (ws.update[i] + noise_sd * rng.normal());
  } else {
    for (std::size_t i = 0; i < d; ++i) theta[i] -= gamma * ws.update[i];
  }
  for (std::size_t i = 0; i < d; ++i) state.e[i] = state.e[i] + ws.grad[i] - ws.update[i];
  state.t = next;
  detail::check_iterate(state.theta, next);
}

// Value-returning conveniences.

inline PcsgdState pcsgd_step(PcsgdState state, const OptimizerConfig& cfg, const LossModel& loss,
                             const DecisionDistribution& dist, RandomStream& rng) {
  StepWorkspace ws;
  pcsgd_step(state, cfg, loss, dist, rng, ws);
  return state;
}

inline PcsgdState sgd_step(PcsgdState state, const OptimizerConfig& cfg, const LossModel& loss,
                           const DecisionDistribution& dist, RandomStream& rng) {
  StepWorkspace ws;
  sgd_step(state, cfg, loss, dist, rng, ws);
  return state;
}

inline DicesgdState dicesgd_step(DicesgdState state, const OptimizerConfig& cfg, const LossModel& loss,
                                 const DecisionDistribution& dist, RandomStream& rng) {
  StepWorkspace ws;
  dicesgd_step(state, cfg, loss, dist, rng, ws);
  return state;
}

// ---------------------------------------------------------------------------
// Trajectories
// ---------------------------------------------------------------------------

struct TrialPoint {
  std::uint64_t t = 0;
  double distance_sq = std::nan("");         ///< ||theta_t - theta_ref||^2
  double grad_norm_sq = std::nan("");        ///< ||grad f(theta_t; theta_t)||^2
  double e_norm_sq = std::nan("");           ///< DiceSGD only
  double shadow_distance_sq = std::nan("");  ///< ||theta_t - gamma_t e_t - theta_ref||^2
  double tnr = std::nan("");
  double tpr = std::nan("");
};

struct TrialResult {
  std::vector<TrialPoint> series;
  ParamVector final_theta;
  std::vector<double> final_e;
  bool diverged = false;
  std::uint64_t divergence_step = 0;
  std::string divergence_message;
  double max_grad_norm = 0.0;  ///< over all stochastic gradients drawn
  double max_e_norm = 0.0;
};

/// What the recorder sees at a recorded step.
struct RecordView {
  std::uint64_t t;
  const ParamVector& theta;
  const std::vector<double>* e;  ///< null unless DiceSGD
  const OptimizerConfig& config;
};

/// Computes the per-point metrics. `reference` enables distance metrics;
/// `exact_sps` computes ||grad f(theta; theta)||^2 from the support.
class Recorder {
 public:
  Recorder() = default;

  Recorder& with_reference(ParamVector reference) {
    reference_ = std::move(reference);
    return *this;
  }

  Recorder& with_exact_sps(std::shared_ptr<const LossModel> loss, std::shared_ptr<const DecisionDistribution> dist) {
    loss_ = std::move(loss);
    dist_ = std::move(dist);
    return *this;
  }

  /// Extra metric hook (e.g. classification rates); may fill tnr/tpr.
  Recorder& with_extra(std::function<void(const ParamVector&, TrialPoint&)> fn) {
    extra_ = std::move(fn);
    return *this;
  }

  const std::optional<ParamVector>& reference() const noexcept { return reference_; }
  bool records_sps() const noexcept { return loss_ != nullptr; }

  TrialPoint operator()(const RecordView& v) const {
    TrialPoint p;
    p.t = v.t;
    if (reference_) p.distance_sq = distance_sq(v.theta.values(), reference_->values());
    if (loss_) {
      const auto g = exact_expected_grad(*dist_, *loss_, v.theta.values(), v.theta.values());
      p.grad_norm_sq = norm_sq(g);
    }
    if (v.e) {
      p.e_norm_sq = norm_sq(*v.e);
      if (reference_) {
        const double gamma = v.t == 0 ? 0.0 : v.config.schedule(v.t);
        double s = 0.0;
        for (std::size_t i = 0; i < v.theta.dim(); ++i) {
          const double r = v.theta[i] - gamma * (*v.e)[i] - (*reference_)[i];
          s += r * r;
        }
        p.shadow_distance_sq = s;
      }
    }
    if (extra_) extra_(v.theta, p);
    return p;
  }

 private:
  std::optional<ParamVector> reference_;
  std::shared_ptr<const LossModel> loss_;
  std::shared_ptr<const DecisionDistribution> dist_;
  std::function<void(const ParamVector&, TrialPoint&)> extra_;
};

/// Runs T steps of `algorithm` from theta0, recording t = 0, k, 2k, ...
/// A divergence or non-finite gradient ends the trial early with the
/// `diverged` flag set and the failing step recorded.
inline TrialResult run_trajectory(Algorithm algorithm, const OptimizerConfig& cfg, const LossModel& loss,
                                  const DecisionDistribution& dist, const ParamVector& theta0,
                                  std::uint64_t T, RandomStream& rng, const Recorder& recorder,
                                  std::uint64_t thin = 1) {
  cfg.validate();
  require(thin >= 1, ErrorKind::invalid_input, "run_trajectory: thinning must be >= 1");
  require(theta0.dim() == loss.dim(), ErrorKind::invalid_input,
          "run_trajectory: theta0 dimension does not match the loss");
  if (cfg.region) {
    require(cfg.region->dim() == theta0.dim(), ErrorKind::invalid_input,
            "run_trajectory: region dimension does not match theta0");
  }
  TrialResult out;
  out.series.reserve(T / thin + 1);
  StepWorkspace ws;
  ws.resize(theta0.dim());

  auto finish_grad = [&] { out.max_grad_norm = std::max(out.max_grad_norm, norm(ws.grad)); };

  if (algorithm == Algorithm::dicesgd) {
    if (cfg.bounded()) {
      throw Error(ErrorKind::unsupported, "dicesgd: only the unconstrained setting is supported");
    }
    DicesgdState st = DicesgdState::start(theta0);
    out.series.push_back(recorder({0, st.theta, &st.e, cfg}));
    try {
      for (std::uint64_t t = 1; t <= T; ++t) {
        dicesgd_step(st, cfg, loss, dist, rng, ws);
        finish_grad();
        out.max_e_norm = std::max(out.max_e_norm, norm(st.e));
        if (t % thin == 0) out.series.push_back(recorder({t, st.theta, &st.e, cfg}));
      }
    } catch (const NumericalError& err) {
      out.diverged = true;
      out.divergence_step = err.step();
      out.divergence_message = err.what();
    }
    out.final_theta = st.theta.is_finite() ? st.theta : theta0;
    out.final_e = st.e;
    return out;
  }

  PcsgdState st{theta0, 0};
  if (cfg.region) st.theta = project(theta0, *cfg.region);
  out.series.push_back(recorder({0, st.theta, nullptr, cfg}));
  try {
    for (std::uint64_t t = 1; t <= T; ++t) {
      if (algorithm == Algorithm::sgd) {
        sgd_step(st, cfg, loss, dist, rng, ws);
      } else {
        pcsgd_step(st, cfg, loss, dist, rng, ws);
      }
      finish_grad();
      if (t % thin == 0) out.series.push_back(recorder({t, st.theta, nullptr, cfg}));
    }
  } catch (const NumericalError& err) {
    out.diverged = true;
    out.divergence_step = err.step();
    out.divergence_message = err.what();
  }
  out.final_theta = st.theta.is_finite() ? st.theta : theta0;
  return out;
}

}  // namespace ppclip

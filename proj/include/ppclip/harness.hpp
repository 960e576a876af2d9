#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "ppclip/bounds.hpp"
#include "ppclip/core.hpp"
#include "ppclip/distributions.hpp"
#include "ppclip/losses.hpp"
#include "ppclip/optimizers.hpp"
#include "ppclip/oracles.hpp"
#include "ppclip/privacy.hpp"
#include "ppclip/random.hpp"

namespace ppclip {

inline constexpr const char* kToolVersion = "0.3.0";

/// Loss, law and optional reference point of one experiment.
struct Problem {
  LossPtr loss;
  DistributionPtr dist;
  std::optional<ParamVector> reference;  ///< theta_PS, when an oracle is configured
  std::string reference_kind = "none";
  bool record_sps = false;                ///< record ||grad f(theta; theta)||^2 (needs support)
  std::function<void(const ParamVector&, TrialPoint&)> extra;

  Recorder recorder() const {
    Recorder r;
    if (reference) r.with_reference(*reference);
    if (record_sps) r.with_exact_sps(loss, dist);
    if (extra) r.with_extra(extra);
    return r;
  }
};

struct ExperimentConfig {
  Algorithm algorithm = Algorithm::pcsgd;
  OptimizerConfig optimizer;
  ParamVector theta0{5.0};
  std::uint64_t T = 100000;
  std::size_t n_trials = 1;
  std::uint64_t seed = 2024;
  std::uint64_t thin = 1;
  std::size_t workers = 1;

  void validate() const {
    require(n_trials >= 1, ErrorKind::config, "experiment: n_trials must be >= 1");
    require(T >= 1, ErrorKind::config, "experiment: T must be >= 1");
    require(thin >= 1, ErrorKind::config, "experiment: thin must be >= 1");
    require(workers >= 1, ErrorKind::config, "experiment: workers must be >= 1");
    optimizer.validate();
  }
};

// ---------------------------------------------------------------------------
// Aggregation
// ---------------------------------------------------------------------------

struct SeriesStats {
  std::vector<std::uint64_t> t;
  std::vector<double> mean;
  std::vector<double> stderr_;
  std::vector<std::size_t> n;

  bool empty() const noexcept { return t.empty(); }
  std::size_t size() const noexcept { return t.size(); }
};

struct FitResult {
  double slope = 0.0;
  double stderr_ = 0.0;
  double intercept = 0.0;
  std::size_t points = 0;

  /// Approximate 95% band on the slope.
  double lower() const { return slope - 1.96 * stderr_; }
  double upper() const { return slope + 1.96 * stderr_; }
};

struct AggregateMetrics {
  SeriesStats distance;  ///< ||theta_t - theta_ref||^2
  SeriesStats grad_norm;
  SeriesStats e_norm;
  SeriesStats shadow;
  SeriesStats tnr;
  SeriesStats tpr;
  std::size_t n_trials = 0;
  std::size_t n_diverged = 0;
  double max_grad_norm = 0.0;  ///< over every stochastic gradient of every trial
  double max_e_norm = 0.0;
  std::vector<ParamVector> final_thetas;  ///< trial order, diverged included

  /// Primary metric: distance to the reference when present, else the
  /// stationarity measure.
  const SeriesStats& primary() const { return distance.empty() ? grad_norm : distance; }
};

struct RunOutput {
  AggregateMetrics metrics;
  std::vector<TrialResult> trials;  ///< kept only on request
};

namespace detail {

inline SeriesStats aggregate_field(const std::vector<const TrialResult*>& ok,
                                   double TrialPoint::*field) {
  SeriesStats s;
  if (ok.empty()) return s;
  const std::size_t len = ok.front()->series.size();
  if (len == 0 || std::isnan(ok.front()->series.front().*field)) return s;
  s.t.resize(len);
  s.mean.resize(len);
  s.stderr_.resize(len);
  s.n.resize(len);
  for (std::size_t k = 0; k < len; ++k) {
    double sum = 0.0;
    for (const auto* r : ok) sum += r->series[k].*field;
    const double n = static_cast<double>(ok.size());
    const double m = sum / n;
    double ss = 0.0;
    for (const auto* r : ok) {
      const double dv = r->series[k].*field - m;
      ss += dv * dv;
    }
    s.t[k] = ok.front()->series[k].t;
    s.mean[k] = m;
    s.stderr_[k] = ok.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;
    s.n[k] = ok.size();
  }
  return s;
}

}  // namespace detail

/// Reduces trial results in trial order, so the outcome does not depend on
/// which worker ran which trial.
inline AggregateMetrics aggregate(const std::vector<TrialResult>& trials) {
  AggregateMetrics a;
  a.n_trials = trials.size();
  std::vector<const TrialResult*> ok;
  for (const auto& r : trials) {
    a.final_thetas.push_back(r.final_theta);
    a.max_grad_norm = std::max(a.max_grad_norm, r.max_grad_norm);
    a.max_e_norm = std::max(a.max_e_norm, r.max_e_norm);
    if (r.diverged) {
      ++a.n_diverged;
    } else {
      ok.push_back(&r);
    }
  }
  a.distance = detail::aggregate_field(ok, &TrialPoint::distance_sq);
  a.grad_norm = detail::aggregate_field(ok, &TrialPoint::grad_norm_sq);
  a.e_norm = detail::aggregate_field(ok, &TrialPoint::e_norm_sq);
  a.shadow = detail::aggregate_field(ok, &TrialPoint::shadow_distance_sq);
  a.tnr = detail::aggregate_field(ok, &TrialPoint::tnr);
  a.tpr = detail::aggregate_field(ok, &TrialPoint::tpr);
  return a;
}

/// Runs one trial: stream (seed, trial) from theta0.
inline TrialResult run_single_trial(const ExperimentConfig& cfg, const Problem& prob, std::size_t trial,
                                    const Recorder& rec) {
  RandomStream rng(cfg.seed, trial, stream_tag::trajectory);
  return run_trajectory(cfg.algorithm, cfg.optimizer, *prob.loss, *prob.dist, cfg.theta0, cfg.T, rng, rec, cfg.thin);
}

/// n_trials independent trajectories on `workers` threads. Results are
/// identical for any worker count.
inline RunOutput run_trials(const ExperimentConfig& cfg, const Problem& prob, bool keep_trials = false) {
  cfg.validate();
  require(prob.loss && prob.dist, ErrorKind::config, "run_trials: problem has no loss or distribution");
  if (prob.record_sps) {
    require(prob.dist->support(cfg.theta0.values()).has_value(), ErrorKind::config,
            "run_trials: stationarity metric needs an enumerable distribution");
  }
  const Recorder rec = prob.recorder();
  std::vector<TrialResult> results(cfg.n_trials);
  std::vector<std::exception_ptr> errors(cfg.n_trials);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < cfg.n_trials; i = next++) {
      try {
        results[i] = run_single_trial(cfg, prob, i, rec);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t nw = std::min(cfg.workers, cfg.n_trials);
  if (nw <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(nw);
    for (std::size_t w = 0; w < nw; ++w) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  RunOutput out;
  out.metrics = aggregate(results);
  if (keep_trials) out.trials = std::move(results);
  return out;
}

// ---------------------------------------------------------------------------
// Rates and plateaus
// ---------------------------------------------------------------------------

/// Least-squares slope of log(value) against log(t) over the last
/// `tail_fraction` of the points.
inline FitResult fit_decay_exponent(std::span<const std::uint64_t> t, std::span<const double> value,
                                    double tail_fraction) {
  require(t.size() == value.size(), ErrorKind::invalid_input, "fit_decay_exponent: length mismatch");
  require(tail_fraction > 0.0 && tail_fraction <= 1.0, ErrorKind::invalid_input,
          "fit_decay_exponent: tail_fraction must lie in (0, 1]");
  const std::size_t n = t.size();
  const auto keep = static_cast<std::size_t>(std::ceil(tail_fraction * static_cast<double>(n)));
  const std::size_t start = n - std::min(keep, n);
  std::vector<double> xs, ys;
  for (std::size_t k = start; k < n; ++k) {
    if (t[k] == 0) continue;
    if (!(value[k] > 0.0)) {
      throw Error(ErrorKind::invalid_input,
                  "fit_decay_exponent: nonpositive value in window (plateau? test the bias instead)");
    }
    xs.push_back(std::log(static_cast<double>(t[k])));
    ys.push_back(std::log(value[k]));
  }
  require(xs.size() >= 10, ErrorKind::invalid_input, "fit_decay_exponent: need >= 10 points in the tail window");
  const double m = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= m;
  my /= m;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  require(sxx > 0.0, ErrorKind::invalid_input, "fit_decay_exponent: degenerate t values");
  FitResult f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.points = xs.size();
  double rss = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double r = ys[i] - f.intercept - f.slope * xs[i];
    rss += r * r;
  }
  f.stderr_ = xs.size() > 2 ? std::sqrt(rss / (m - 2.0) / sxx) : 0.0;
  return f;
}

inline FitResult fit_decay_exponent(const SeriesStats& s, double tail_fraction) {
  return fit_decay_exponent(s.t, s.mean, tail_fraction);
}

/// Mean of the final `fraction` of recorded points.
inline double plateau(const SeriesStats& s, double fraction = 0.1) {
  require(!s.empty(), ErrorKind::invalid_input, "plateau: empty series");
  const auto keep = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(fraction * s.size())));
  const std::size_t start = s.size() - std::min(keep, s.size());
  double acc = 0.0;
  for (std::size_t k = start; k < s.size(); ++k) acc += s.mean[k];
  return acc / static_cast<double>(s.size() - start);
}

/// Running minimum of the mean curve, evaluated at the last point.
inline double running_min(const SeriesStats& s) {
  require(!s.empty(), ErrorKind::invalid_input, "running_min: empty series");
  return *std::min_element(s.mean.begin(), s.mean.end());
}

/// Ordinary least-squares slope of value against t (per-step trend).
inline FitResult fit_linear_trend(std::span<const std::uint64_t> t, std::span<const double> value) {
  require(t.size() == value.size() && t.size() >= 3, ErrorKind::invalid_input,
          "fit_linear_trend: need >= 3 points");
  const double m = static_cast<double>(t.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    mx += static_cast<double>(t[i]);
    my += value[i];
  }
  mx /= m;
  my /= m;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double dx = static_cast<double>(t[i]) - mx;
    sxx += dx * dx;
    sxy += dx * (value[i] - my);
  }
  FitResult f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.points = t.size();
  double rss = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double r = value[i] - f.intercept - f.slope * static_cast<double>(t[i]);
    rss += r * r;
  }
  f.stderr_ = std::sqrt(rss / (m - 2.0) / sxx);
  return f;
}

// ---------------------------------------------------------------------------
// Measured constants
// ---------------------------------------------------------------------------

struct MeasuredConstants {
  std::optional<double> G;       ///< largest stochastic gradient norm seen
  std::optional<double> sigma0;  ///< sqrt(max exact variance over probe points)
  std::optional<double> sigma1;
  std::optional<double> M;       ///< 2 x largest ||e_t||
  std::optional<double> delta0;  ///< f(theta0; theta0) - loss floor

  nlohmann::json to_json() const {
    nlohmann::json j = nlohmann::json::object();
    auto put = [&](const char* k, const std::optional<double>& v) { j[k] = v ? nlohmann::json(*v) : nlohmann::json(); };
    put("G", G);
    put("sigma0", sigma0);
    put("sigma1", sigma1);
    put("M", M);
    put("delta0", delta0);
    return j;
  }
};

/// sigma1 is taken as 0, so sigma0^2 must cover the largest variance.
inline double measure_sigma0(const LossModel& loss, const DecisionDistribution& dist,
                             const std::vector<ParamVector>& probes) {
  double v = 0.0;
  for (const auto& th : probes) v = std::max(v, exact_grad_variance(dist, loss, th.values()));
  return std::sqrt(v);
}

/// Evenly spaced probe points on [lo, hi] (scalar models).
inline std::vector<ParamVector> scalar_probes(double lo, double hi, std::size_t n) {
  std::vector<ParamVector> out;
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(ParamVector{lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1)});
  }
  return out;
}

inline MeasuredConstants measure_constants(const AggregateMetrics& m, const Problem& prob, const ParamVector& theta0,
                                           const std::vector<ParamVector>& probes) {
  MeasuredConstants k;
  k.G = m.max_grad_norm;
  if (m.max_e_norm > 0.0) k.M = 2.0 * m.max_e_norm;
  if (prob.dist->support(theta0.values())) {
    if (!probes.empty()) {
      k.sigma0 = measure_sigma0(*prob.loss, *prob.dist, probes);
      k.sigma1 = 0.0;
    }
    k.delta0 = exact_expected_loss(*prob.dist, *prob.loss, theta0.values(), theta0.values()) -
               prob.loss->constants().loss_floor;
  }
  return k;
}

// ---------------------------------------------------------------------------
// Sweeps on the scalar quadratic instance
// ---------------------------------------------------------------------------

struct QuadraticExperiment {
  QuadraticInstance inst;
  double box_lo = -10.0;
  double box_hi = 10.0;
  double theta0 = 5.0;
  StepSchedule schedule = StepSchedule::polynomial(10.0, 100.0);
  std::uint64_t T = 100000;
  std::size_t n_trials = 100;
  std::uint64_t seed = 2024;
  std::uint64_t thin = 100;
  std::size_t workers = 1;

  Problem problem() const {
    Problem p;
    p.loss = make_loss(inst);
    p.dist = make_distribution(inst);
    p.reference = ParamVector{theta_ps_quadratic(inst)};
    p.reference_kind = "closed-form";
    return p;
  }

  ExperimentConfig config(Algorithm alg) const {
    ExperimentConfig c;
    c.algorithm = alg;
    c.optimizer.schedule = schedule;
    c.optimizer.clip_c = inst.c;
    c.optimizer.clip_c1 = inst.c;
    c.optimizer.clip_c2 = inst.c;
    if (alg != Algorithm::dicesgd) c.optimizer.region = BoxRegion::uniform(1, box_lo, box_hi);
    c.theta0 = ParamVector{theta0};
    c.T = T;
    c.n_trials = n_trials;
    c.seed = seed;
    c.thin = thin;
    c.workers = workers;
    return c;
  }

  /// mu - L beta with mu = 1, L = max(1, a).
  double mu_tilde() const { return 1.0 - std::max(1.0, inst.a) * inst.beta; }
  double grad_bound() const { return quadratic_grad_bound(inst, box_lo, box_hi); }
};

struct BiasRow {
  double beta = 0.0;
  bool stable = true;
  double plateau = std::nan("");
  double closed_form = std::nan("");
  double upper = std::nan("");
  std::size_t diverged = 0;
  std::string note;
};

/// PCSGD (sigma_dp = 0) at each beta: empirical plateau vs closed-form bias
/// vs the upper bound 8 C1/mu_tilde^2.
inline std::vector<BiasRow> bias_sweep(QuadraticExperiment base, const std::vector<double>& betas) {
  std::vector<BiasRow> rows;
  for (double beta : betas) {
    BiasRow r;
    r.beta = beta;
    base.inst.beta = beta;
    if (base.mu_tilde() <= 0.0) {
      r.stable = false;
      r.note = "beta >= mu/L: unstable, skipped";
      rows.push_back(r);
      continue;
    }
    r.closed_form = quadratic_bias(base.inst);
    ScvxBoundParams bp;
    bp.mu_tilde = base.mu_tilde();
    bp.c = base.inst.c;
    bp.G = base.grad_bound();
    r.upper = bias_upper_scvx(bp);
    const auto out = run_trials(base.config(Algorithm::pcsgd), base.problem());
    r.plateau = plateau(out.metrics.distance, 0.1);
    r.diverged = out.metrics.n_diverged;
    rows.push_back(r);
  }
  return rows;
}

struct PrivacyRow {
  double epsilon = 0.0;
  double sigma_dp = 0.0;
  bool regime_ok = true;
  bool ok = true;
  double gamma_star = std::nan("");
  double gamma_naive = std::nan("");
  double err_star = std::nan("");
  double err_star_se = std::nan("");
  double err_naive = std::nan("");
  double err_naive_se = std::nan("");
  std::string note;
};

struct PrivacySweepSetup {
  QuadraticExperiment base;  ///< schedule is replaced per row
  double m = 1e5;
  double delta = 1e-5;
  double mu = 1.0;  ///< the shift-unaware modulus
};

/// For each epsilon: calibrate sigma_dp, run PCSGD with the shift-aware step
/// gamma* and with the shift-unaware one; record the final error
/// |theta_T - theta_PS|^2. Both runs share the random streams.
inline std::vector<PrivacyRow> privacy_tradeoff_sweep(const PrivacySweepSetup& s, const std::vector<double>& epsilons) {
  std::vector<PrivacyRow> rows;
  const QuadraticExperiment& base = s.base;
  const double theta_ps = theta_ps_quadratic(base.inst);
  for (double eps : epsilons) {
    PrivacyRow r;
    r.epsilon = eps;
    try {
      PrivacyBudget b{eps, s.delta, s.m, static_cast<double>(base.T), 1};
      const auto cal = dp_sigma_checked(base.inst.c, b);
      r.sigma_dp = cal.sigma;
      r.regime_ok = cal.regime_ok;
      r.note = cal.note;
      OptimalStepInputs in{base.mu_tilde(), base.T, base.inst.c, base.grad_bound(), 1, cal.sigma,
                           (base.theta0 - theta_ps) * (base.theta0 - theta_ps)};
      r.gamma_star = optimal_step_size(in);
      r.gamma_naive = naive_step_size(in, s.mu);
      for (int which = 0; which < 2; ++which) {
        QuadraticExperiment e = base;
        e.schedule = which == 0 ? StepSchedule::theoretical_optimal(r.gamma_star, in)
                                : StepSchedule::constant(r.gamma_naive);
        auto cfg = e.config(Algorithm::pcsgd);
        cfg.optimizer.sigma_dp = cal.sigma;
        cfg.thin = e.T;
        const auto out = run_trials(cfg, e.problem());
        const auto& d = out.metrics.distance;
        (which == 0 ? r.err_star : r.err_naive) = d.mean.back();
        (which == 0 ? r.err_star_se : r.err_naive_se) = d.stderr_.back();
      }
    } catch (const Error& e) {
      r.ok = false;
      r.note = e.what();
    }
    rows.push_back(r);
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Logistic experiment helpers
// ---------------------------------------------------------------------------

struct Rates {
  double tnr = std::nan("");
  double tpr = std::nan("");
};

/// True negative / positive rates of sign(x'theta) on the records after
/// their strategic response to theta.
inline Rates classification_rates(const StrategicFeatureShift& shifted, std::span<const double> theta) {
  std::size_t tn = 0, neg = 0, tp = 0, pos = 0;
  Sample z;
  for (const auto& base : shifted.database().records()) {
    shifted.respond(base, theta, z);
    const bool pred = dot(z.x, theta) > 0.0;
    if (z.label == 1) {
      ++pos;
      tp += pred ? 1 : 0;
    } else {
      ++neg;
      tn += pred ? 0 : 1;
    }
  }
  Rates r;
  if (neg) r.tnr = static_cast<double>(tn) / static_cast<double>(neg);
  if (pos) r.tpr = static_cast<double>(tp) / static_cast<double>(pos);
  return r;
}

// ---------------------------------------------------------------------------
// Output
// ---------------------------------------------------------------------------

inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct EmitOptions {
  std::optional<std::vector<double>> bound;  ///< same length as the series
  bool include_e_norm = true;
  bool include_rates = false;
};

/// CSV columns: t, mean, stderr, n[, bound][, e_norm_sq_mean][, tnr_mean, tpr_mean]
inline void write_series_csv(const AggregateMetrics& m, const std::filesystem::path& path, const EmitOptions& opt = {}) {
  const SeriesStats& s = m.primary();
  if (s.empty()) throw Error(ErrorKind::invalid_input, "emit_results: no recorded points to write");
  if (opt.bound) {
    require(opt.bound->size() == s.size(), ErrorKind::invalid_input, "emit_results: bound length mismatch");
  }
  const bool with_e = opt.include_e_norm && !m.e_norm.empty();
  const bool with_rates = opt.include_rates && !m.tnr.empty();
  std::ofstream os(path);
  if (!os) throw Error(ErrorKind::io, "cannot open '" + path.string() + "' for writing");
  os << "t,mean,stderr,n";
  if (opt.bound) os << ",bound";
  if (with_e) os << ",e_norm_sq_mean";
  if (with_rates) os << ",tnr_mean,tpr_mean";
  os << '\n';
  for (std::size_t k = 0; k < s.size(); ++k) {
    os << s.t[k] << ',' << fmt17(s.mean[k]) << ',' << fmt17(s.stderr_[k]) << ',' << s.n[k];
    if (opt.bound) os << ',' << fmt17((*opt.bound)[k]);
    if (with_e) os << ',' << fmt17(m.e_norm.mean[k]);
    if (with_rates) os << ',' << fmt17(m.tnr.mean[k]) << ',' << fmt17(m.tpr.mean[k]);
    os << '\n';
  }
  os.flush();
  if (!os) throw Error(ErrorKind::io, "write failed for '" + path.string() + "'");
}

inline void write_json(const nlohmann::json& j, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorKind::io, "cannot open '" + path.string() + "' for writing");
  os << j.dump(2) << '\n';
  if (!os) throw Error(ErrorKind::io, "write failed for '" + path.string() + "'");
}

/// Writes `<stem>.csv` and the `<stem>.json` metadata sidecar.
inline void emit_results(const AggregateMetrics& m, const std::filesystem::path& dir, const std::string& stem,
                         nlohmann::json metadata, const EmitOptions& opt = {}) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::io, "cannot create directory '" + dir.string() + "': " + ec.message());
  write_series_csv(m, dir / (stem + ".csv"), opt);
  metadata["tool_version"] = kToolVersion;
  metadata["n_trials"] = m.n_trials;
  metadata["n_diverged"] = m.n_diverged;
  metadata["recorded_points"] = m.primary().size();
  metadata["metric"] = m.distance.empty() ? "grad_norm_sq" : "distance_sq";
  write_json(metadata, dir / (stem + ".json"));
}

/// Parses a CSV written by write_series_csv back into columns.
inline std::vector<std::vector<double>> read_csv_columns(const std::filesystem::path& path,
                                                         std::vector<std::string>* header = nullptr) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorKind::io, "cannot open '" + path.string() + "'");
  std::string line;
  std::getline(is, line);
  std::vector<std::string> names;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) names.push_back(cell);
  }
  std::vector<std::vector<double>> cols(names.size());
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    for (std::size_t k = 0; k < names.size() && std::getline(ss, cell, ','); ++k) cols[k].push_back(std::stod(cell));
  }
  if (header) *header = names;
  return cols;
}

}  // namespace ppclip

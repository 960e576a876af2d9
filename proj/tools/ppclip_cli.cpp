// ppclip command-line front end: run, sweep, oracle, calibrate, check-bounds.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "ppclip/config.hpp"

namespace fs = std::filesystem;
using namespace ppclip;

namespace {

struct Args {
  std::string config;
  std::string out = "ppclip_out";
  std::vector<std::string> sets;
  long long seed = -1;
  long long trials = -1;
  long long workers = -1;
  bool verbose = false;
};

int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::numerical_failure:
    case ErrorKind::non_convergence: return 3;
    case ErrorKind::io: return 4;
    default: return 2;
  }
}

Config resolve(const Args& a) {
  Config c;
  if (!a.config.empty()) c.load_ini(a.config);
  for (const auto& kv : a.sets) c.apply_override(kv);
  if (a.seed >= 0) c.set("experiment.seed", std::to_string(a.seed));
  if (a.trials >= 0) c.set("experiment.trials", std::to_string(a.trials));
  if (a.workers >= 0) c.set("experiment.workers", std::to_string(a.workers));
  return c;
}

fs::path prepare_out(const Args& a, const Config& c) {
  fs::path dir(a.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::io, "cannot create output directory '" + dir.string() + "': " + ec.message());
  std::ofstream os(dir / "resolved.ini");
  if (!os) throw Error(ErrorKind::io, "cannot write '" + (dir / "resolved.ini").string() + "'");
  os << c.to_ini();
  return dir;
}

std::string g(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

nlohmann::json base_metadata(const Config& c, const Problem& p) {
  nlohmann::json j;
  j["config"] = c.to_json();
  j["seed"] = c.u64("experiment.seed");
  j["oracle"] = p.reference_kind;
  if (p.reference) j["theta_ref"] = p.reference->vec();
  return j;
}

std::vector<ParamVector> probes_for(const Config& c, const Problem& p) {
  if (p.loss->dim() != 1 || !p.dist->support(std::vector<double>{0.0})) return {};
  return scalar_probes(c.num("optimizer.lower"), c.num("optimizer.upper"), 201);
}

// -- run ---------------------------------------------------------------------

int cmd_run(const Args& a) {
  const Config c = resolve(a);
  const Problem prob = build_problem(c);
  const fs::path dir = prepare_out(a, c);
  for (Algorithm alg : algorithms(c)) {
    const ExperimentConfig e = build_experiment(c, alg, prob);
    const RunOutput out = run_trials(e, prob);
    const auto& m = out.metrics;
    nlohmann::json meta = base_metadata(c, prob);
    meta["algorithm"] = to_string(alg);
    meta["schedule"] = e.optimizer.schedule.describe();
    meta["sigma_dp"] = e.optimizer.sigma_dp;
    meta["measured"] = measure_constants(m, prob, e.theta0, probes_for(c, prob)).to_json();
    EmitOptions opt;
    opt.include_rates = !m.tnr.empty();
    emit_results(m, dir, to_string(alg), meta, opt);
    const auto& s = m.primary();
    std::cout << to_string(alg) << ": metric=" << (m.distance.empty() ? "grad_norm_sq" : "distance_sq")
              << " final_mean=" << g(s.mean.back()) << " stderr=" << g(s.stderr_.back())
              << " trials=" << m.n_trials << " diverged=" << m.n_diverged << '\n';
  }
  std::cout << "wrote " << dir.string() << '\n';
  return 0;
}

// -- sweep -------------------------------------------------------------------

int cmd_sweep(const Args& a) {
  const Config c = resolve(a);
  if (c.get("experiment.problem") != "quadratic") {
    throw Error(ErrorKind::config, "sweep: only the quadratic problem supports sweeps");
  }
  const fs::path dir = prepare_out(a, c);
  const std::string kind = c.get("sweep.kind");
  std::ofstream os(dir / "sweep.csv");
  if (!os) throw Error(ErrorKind::io, "cannot write '" + (dir / "sweep.csv").string() + "'");
  if (kind == "bias") {
    const auto rows = bias_sweep(quadratic_experiment(c), c.list("sweep.betas"));
    os << "beta,plateau,closed_form_bias,bias_upper,stable,diverged\n";
    for (const auto& r : rows) {
      os << fmt17(r.beta) << ',' << fmt17(r.plateau) << ',' << fmt17(r.closed_form) << ',' << fmt17(r.upper) << ','
         << (r.stable ? 1 : 0) << ',' << r.diverged << '\n';
      std::cout << "beta=" << g(r.beta) << " plateau=" << g(r.plateau) << " bias=" << g(r.closed_form)
                << " upper=" << g(r.upper) << (r.stable ? "" : " [" + r.note + "]") << '\n';
    }
  } else if (kind == "privacy") {
    PrivacySweepSetup s;
    s.base = quadratic_experiment(c);
    s.m = c.num("privacy.m");
    s.delta = c.num("privacy.delta");
    s.mu = c.num("sweep.mu");
    const auto rows = privacy_tradeoff_sweep(s, c.list("sweep.epsilons"));
    os << "epsilon,sigma_dp,regime_ok,gamma_star,gamma_naive,err_star,err_star_se,err_naive,err_naive_se,ok\n";
    for (const auto& r : rows) {
      os << fmt17(r.epsilon) << ',' << fmt17(r.sigma_dp) << ',' << (r.regime_ok ? 1 : 0) << ',' << fmt17(r.gamma_star)
         << ',' << fmt17(r.gamma_naive) << ',' << fmt17(r.err_star) << ',' << fmt17(r.err_star_se) << ','
         << fmt17(r.err_naive) << ',' << fmt17(r.err_naive_se) << ',' << (r.ok ? 1 : 0) << '\n';
      std::cout << "epsilon=" << g(r.epsilon) << " sigma_dp=" << g(r.sigma_dp) << " err(gamma*)=" << g(r.err_star)
                << " err(naive)=" << g(r.err_naive) << (r.ok ? "" : " [" + r.note + "]") << '\n';
    }
  } else {
    throw Error(ErrorKind::config, "sweep.kind must be bias or privacy");
  }
  return 0;
}

// -- oracle ------------------------------------------------------------------

int cmd_oracle(const Args& a) {
  const Config c = resolve(a);
  const fs::path dir = prepare_out(a, c);
  nlohmann::json j;
  const std::string kind = c.get("experiment.problem");
  if (kind == "quadratic") {
    const auto q = quadratic_instance(c);
    const double ps = theta_ps_quadratic(q);
    std::cout << "theta_ps = " << g(ps) << '\n';
    j["theta_ps"] = ps;
    try {
      const double inf = theta_inf_quadratic(q);
      const double bias = quadratic_bias(q);
      std::cout << "theta_inf = " << g(inf) << '\n' << "bias = " << g(bias) << '\n';
      j["theta_inf"] = inf;
      j["bias"] = bias;
    } catch (const Error& e) {
      std::cout << "theta_inf = n/a (" << e.what() << ")\n";
    }
  } else if (kind == "logistic") {
    Config cc = c;
    cc.set("oracle.kind", "rrm");
    const Problem p = build_problem(cc);
    std::cout << "theta_ps =";
    for (double v : p.reference->values()) std::cout << ' ' << g(v);
    std::cout << '\n';
    const auto r = exact_expected_grad(*p.dist, *p.loss, p.reference->values(), p.reference->values());
    std::cout << "residual = " << g(norm(r)) << '\n';
    j["theta_ps"] = p.reference->vec();
    j["residual"] = norm(r);
  } else {
    throw Error(ErrorKind::config, "oracle: no oracle for problem '" + kind + "'");
  }
  write_json(j, dir / "oracle.json");
  return 0;
}

// -- calibrate ---------------------------------------------------------------

int cmd_calibrate(const Args& a) {
  const Config c = resolve(a);
  const fs::path dir = prepare_out(a, c);
  PrivacyBudget b{c.num("privacy.epsilon"), c.num("privacy.delta"), c.num("privacy.m"),
                  static_cast<double>(c.u64("experiment.T")), problem_dim(c)};
  const auto r = dp_sigma_checked(c.num("optimizer.c"), b, {c.flag("privacy.strict")});
  std::cout << "sigma_dp = " << g(r.sigma) << '\n' << "phi = " << g(privacy_phi(b)) << '\n';
  if (!r.regime_ok) std::cout << "warning: " << r.note << '\n';
  nlohmann::json j{{"sigma_dp", r.sigma}, {"phi", privacy_phi(b)}, {"regime_ok", r.regime_ok}};
  if (c.get("experiment.problem") == "quadratic") {
    const auto q = quadratic_instance(c);
    const double G = quadratic_grad_bound(q, c.num("optimizer.lower"), c.num("optimizer.upper"));
    const auto cs = optimal_clip_threshold(G, b.m, b.epsilon, b.delta, b.d);
    std::cout << "G = " << g(G) << '\n' << "c_star = " << g(cs.c_star) << '\n';
    j["G"] = G;
    j["c_star"] = cs.c_star;
  }
  write_json(j, dir / "calibrate.json");
  return 0;
}

// -- check-bounds ------------------------------------------------------------

int cmd_check_bounds(const Args& a) {
  const Config c = resolve(a);
  const Problem prob = build_problem(c);
  const fs::path dir = prepare_out(a, c);
  const Algorithm alg = algorithms(c).front();
  const ExperimentConfig e = build_experiment(c, alg, prob);
  const RunOutput out = run_trials(e, prob);
  const auto& m = out.metrics;
  const std::string kind = c.get("experiment.problem");
  std::string which = c.get("bounds.kind");
  if (which == "auto") {
    if (kind == "quadratic") which = alg == Algorithm::dicesgd ? "dice_scvx" : "pcsgd_scvx";
    else if (kind == "nonconvex") which = alg == Algorithm::dicesgd ? "dice_ncvx" : "pcsgd_ncvx";
    else throw Error(ErrorKind::config, "check-bounds: no bound applies to problem '" + kind + "'");
  }
  const MeasuredConstants mc = measure_constants(m, prob, e.theta0, probes_for(c, prob));
  std::vector<double> bound;
  const SeriesStats* series = &m.primary();
  SeriesStats runmin;

  if (which == "pcsgd_scvx" || which == "dice_scvx") {
    if (kind != "quadratic") throw Error(ErrorKind::config, "check-bounds: " + which + " needs the quadratic problem");
    const auto q = quadratic_instance(c);
    const double mt = 1.0 - std::max(1.0, q.a) * q.beta;
    const double gap0 = distance_sq(e.theta0.values(), prob.reference->values());
    if (which == "pcsgd_scvx") {
      ScvxBoundParams p{mt, e.optimizer.clip_c,
                        quadratic_grad_bound(q, c.num("optimizer.lower"), c.num("optimizer.upper")), 1,
                        e.optimizer.sigma_dp, gap0, e.optimizer.schedule};
      const PcsgdScvxBound b(p, e.T);
      for (auto t : series->t) bound.push_back(t == 0 ? gap0 : b(t - 1));
    } else {
      require(e.optimizer.schedule.kind() == ScheduleKind::polynomial, ErrorKind::config,
              "check-bounds: dice_scvx needs a polynomial schedule");
      series = &m.shadow;
      DiceScvxParams p;
      p.mu_tilde = mt;
      p.G = q.a * q.b * std::sqrt(q.p * (1.0 - q.p));
      p.B = q.contraction();
      p.sigma_dp = e.optimizer.dp_multiplier * e.optimizer.sigma_dp;
      p.L = std::max(1.0, q.a);
      p.M = mc.M.value_or(0.0);
      p.beta = q.beta;
      p.b = c.num("bounds.b");
      p.a0 = e.optimizer.schedule.a0();
      p.a1 = e.optimizer.schedule.a1();
      p.b_bar = c.get("bounds.b_bar") == "auto" ? dice_scvx_min_b_bar(p.a0, p.a1, e.T + 1) : c.num("bounds.b_bar");
      p.initial_sq = gap0;
      const DiceScvxBound b(p, e.T);
      for (auto t : series->t) bound.push_back(t == 0 ? gap0 : b(t - 1));
    }
  } else if (which == "pcsgd_ncvx" || which == "dice_ncvx") {
    if (kind != "nonconvex") throw Error(ErrorKind::config, "check-bounds: " + which + " needs the nonconvex problem");
    runmin = m.grad_norm;
    for (std::size_t k = 1; k < runmin.size(); ++k) runmin.mean[k] = std::min(runmin.mean[k], runmin.mean[k - 1]);
    series = &runmin;
    const auto& kc = prob.loss->constants();
    if (which == "pcsgd_ncvx") {
      NcvxBoundParams p;
      p.delta0 = mc.delta0.value_or(0.0);
      p.L = kc.lipschitz;
      p.sigma0 = mc.sigma0.value_or(0.0);
      p.sigma1 = 0.0;
      p.ell_max = kc.loss_bound.value_or(0.0);
      p.beta = prob.dist->beta();
      p.c = e.optimizer.clip_c;
      p.G = *kc.grad_bound;
      p.sigma_dp = e.optimizer.sigma_dp;
      p.schedule = e.optimizer.schedule;
      for (auto t : series->t) bound.push_back(pcsgd_ncvx_rhs(p, std::max<std::uint64_t>(t, 1)));
    } else {
      DiceNcvxParams p;
      p.C1 = e.optimizer.clip_c1;
      p.C2 = e.optimizer.clip_c2;
      p.sigma_dp = e.optimizer.dp_multiplier * e.optimizer.sigma_dp;
      p.ell_max = kc.loss_bound.value_or(0.0);
      p.beta = prob.dist->beta();
      p.delta0 = mc.delta0.value_or(0.0);
      p.L = kc.lipschitz;
      p.sigma0 = mc.sigma0.value_or(0.0);
      p.M = mc.M.value_or(0.0);
      const double v = dice_ncvx_rhs(p, e.T);
      bound.assign(series->size(), v);
    }
  } else {
    throw Error(ErrorKind::config, "bounds.kind must be auto, pcsgd_scvx, pcsgd_ncvx, dice_scvx or dice_ncvx");
  }

  AggregateMetrics view = m;
  view.distance = *series;
  EmitOptions opt;
  opt.bound = bound;
  nlohmann::json meta = base_metadata(c, prob);
  meta["algorithm"] = to_string(alg);
  meta["bound"] = which;
  meta["measured"] = mc.to_json();
  emit_results(view, dir, "bounds", meta, opt);
  std::size_t violations = 0;
  for (std::size_t k = 0; k < series->size(); ++k) {
    // relative slack: at t = 0 both sides are the same gap computed two ways
    if (series->mean[k] - 3.0 * series->stderr_[k] > bound[k] * (1.0 + 1e-12)) ++violations;
  }
  std::cout << which << ": points=" << series->size() << " violations=" << violations << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Clipped SGD under decision-dependent distributions"};
  app.require_subcommand(1);
  Args args;
  app.add_option("--config", args.config, "INI config file")->check(CLI::ExistingFile);
  app.add_option("--out", args.out, "output directory");
  app.add_option("--seed", args.seed, "override experiment.seed");
  app.add_option("--trials", args.trials, "override experiment.trials");
  app.add_option("--workers", args.workers, "override experiment.workers");
  app.add_option("--set", args.sets, "section.key=value override (repeatable)");
  app.add_flag("-v,--verbose", args.verbose, "print resolved config");

  struct Cmd {
    const char* name;
    const char* help;
    int (*fn)(const Args&);
  };
  const Cmd cmds[] = {{"run", "run Monte-Carlo trials", cmd_run},
                      {"sweep", "bias or privacy sweep", cmd_sweep},
                      {"oracle", "print closed-form / RRM reference points", cmd_oracle},
                      {"calibrate", "DP noise calibration", cmd_calibrate},
                      {"check-bounds", "bound curve vs Monte-Carlo mean", cmd_check_bounds}};
  int (*chosen)(const Args&) = nullptr;
  for (const auto& cmd : cmds) {
    auto* sub = app.add_subcommand(cmd.name, cmd.help);
    sub->fallthrough();
    sub->callback([&chosen, fn = cmd.fn] { chosen = fn; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  try {
    if (args.verbose) std::cerr << resolve(args).to_ini();
    return chosen(args);
  } catch (const Error& e) {
    std::cerr << "error[" << to_string(e.kind()) << "]: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error[internal]: " << e.what() << '\n';
    return 1;
  }
}

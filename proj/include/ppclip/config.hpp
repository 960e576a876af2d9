#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "json.hpp"

#include "ppclip/harness.hpp"

namespace ppclip {

/// Flat `section.key -> text` configuration with a fixed schema. Every key
/// has a default; unknown keys are errors so typos never pass silently.
class Config {
 public:
  static const std::vector<std::pair<std::string, std::string>>& schema() {
    static const std::vector<std::pair<std::string, std::string>> s = {
        {"experiment.problem", "quadratic"},  // quadratic | logistic | nonconvex
        {"experiment.algorithm", "pcsgd"},    // sgd | pcsgd | dicesgd, comma list for `run`
        {"experiment.T", "100000"},
        {"experiment.trials", "1"},
        {"experiment.seed", "2024"},
        {"experiment.thin", "100"},
        {"experiment.workers", "1"},
        {"experiment.theta0", "5"},  // comma list; a single value is broadcast
        {"quadratic.p", "0.1"},
        {"quadratic.a", "10"},
        {"quadratic.b", "1"},
        {"quadratic.beta", "0.01"},
        {"nonconvex.p0", "0.3"},
        {"nonconvex.b", "1"},
        {"nonconvex.beta", "0.05"},
        {"logistic.m", "15776"},
        {"logistic.d", "10"},
        {"logistic.positive_rate", "0.06624"},
        {"logistic.separation", "1.5"},
        {"logistic.beta", "0.01"},
        {"logistic.eta", "auto"},  // auto: 100 / (training size)
        {"logistic.test_fraction", "0.3"},
        {"logistic.csv", ""},
        {"logistic.data_seed", "7"},
        {"optimizer.schedule", "polynomial"},  // constant | polynomial | optimal
        {"optimizer.a0", "10"},
        {"optimizer.a1", "100"},
        {"optimizer.gamma", "0.01"},
        {"optimizer.c", "1"},
        {"optimizer.c1", "1"},
        {"optimizer.c2", "1"},
        {"optimizer.sigma_dp", "0"},
        {"optimizer.dp_multiplier", "9.7979589711327115"},
        {"optimizer.region", "box"},  // box | none
        {"optimizer.lower", "-10"},
        {"optimizer.upper", "10"},
        {"privacy.enabled", "false"},  // calibrate sigma_dp from the budget
        {"privacy.epsilon", "0.1"},
        {"privacy.delta", "1e-5"},
        {"privacy.m", "100000"},
        {"privacy.strict", "false"},
        {"oracle.kind", "closed-form"},  // closed-form | rrm | none
        {"oracle.tol", "1e-8"},
        {"oracle.saa_samples", "100000"},
        {"sweep.kind", "bias"},  // bias | privacy
        {"sweep.betas", "0,0.02,0.04,0.06,0.08"},
        {"sweep.epsilons", "0.01,0.1"},
        {"sweep.mu", "1"},
        {"bounds.kind", "auto"},  // auto | pcsgd_scvx | pcsgd_ncvx | dice_scvx | dice_ncvx
        {"bounds.b", "0.1"},
        {"bounds.b_bar", "auto"},
    };
    return s;
  }

  Config() {
    for (const auto& [k, v] : schema()) values_[k] = v;
  }

  static bool known(const std::string& key) {
    for (const auto& [k, v] : schema()) {
      if (k == key) return true;
    }
    return false;
  }

  void set(const std::string& key, const std::string& value) {
    if (!known(key)) throw Error(ErrorKind::config, "unknown config key '" + key + "'");
    values_[key] = value;
  }

  /// KEY=VALUE from the command line.
  void apply_override(const std::string& kv) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw Error(ErrorKind::config, "override '" + kv + "' is not of the form section.key=value");
    }
    set(trim(kv.substr(0, eq)), trim(kv.substr(eq + 1)));
  }

  void load_ini(const std::string& path) {
    boost::property_tree::ptree tree;
    try {
      boost::property_tree::ini_parser::read_ini(path, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
      if (e.line() == 0) throw Error(ErrorKind::io, "cannot read config '" + path + "'");
      throw Error(ErrorKind::config, std::string("config parse error: ") + e.what());
    }
    for (const auto& [section, body] : tree) {
      if (body.empty()) {
        if (body.data().empty()) continue;  // empty section
        throw Error(ErrorKind::config, "config key '" + section + "' is outside any section");
      }
      for (const auto& [key, leaf] : body) set(section + "." + key, leaf.get_value<std::string>());
    }
  }

  const std::string& get(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw Error(ErrorKind::config, "unknown config key '" + key + "'");
    return it->second;
  }

  double num(const std::string& key) const { return parse_double(key, get(key)); }

  std::uint64_t u64(const std::string& key) const {
    const std::string& s = get(key);
    const double v = parse_double(key, s);
    if (!(v >= 0.0) || v != std::floor(v) || v > 1.8e19) {
      throw Error(ErrorKind::config, "config key '" + key + "' must be a nonnegative integer, got '" + s + "'");
    }
    // exact for integers written without exponent
    if (s.find_first_of("eE.") == std::string::npos) return std::stoull(s);
    return static_cast<std::uint64_t>(v);
  }

  bool flag(const std::string& key) const {
    const std::string& s = get(key);
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
    throw Error(ErrorKind::config, "config key '" + key + "' must be a boolean, got '" + s + "'");
  }

  std::vector<double> list(const std::string& key) const {
    std::vector<double> out;
    std::stringstream ss(get(key));
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      cell = trim(cell);
      if (!cell.empty()) out.push_back(parse_double(key, cell));
    }
    if (out.empty()) throw Error(ErrorKind::config, "config key '" + key + "' is empty");
    return out;
  }

  std::vector<std::string> words(const std::string& key) const {
    std::vector<std::string> out;
    std::stringstream ss(get(key));
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      cell = trim(cell);
      if (!cell.empty()) out.push_back(cell);
    }
    return out;
  }

  std::string to_ini() const {
    std::ostringstream os;
    std::string section;
    for (const auto& [k, v] : schema()) {
      const auto dot = k.find('.');
      const std::string sec = k.substr(0, dot);
      if (sec != section) {
        if (!section.empty()) os << '\n';
        os << '[' << sec << "]\n";
        section = sec;
      }
      os << k.substr(dot + 1) << " = " << values_.at(k) << '\n';
    }
    return os.str();
  }

  nlohmann::json to_json() const {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [k, v] : values_) j[k] = v;
    return j;
  }

 private:
  static std::string trim(std::string s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
  }

  static double parse_double(const std::string& key, const std::string& s) {
    try {
      std::size_t used = 0;
      const double v = std::stod(s, &used);
      if (trim(s.substr(used)).empty() && std::isfinite(v)) return v;
    } catch (const std::exception&) {
    }
    throw Error(ErrorKind::config, "config key '" + key + "' must be a finite number, got '" + s + "'");
  }

  std::map<std::string, std::string> values_;
};

// ---------------------------------------------------------------------------
// Building experiments from a Config
// ---------------------------------------------------------------------------

inline QuadraticInstance quadratic_instance(const Config& c) {
  return {c.num("quadratic.p"), c.num("quadratic.a"), c.num("quadratic.b"), c.num("quadratic.beta"),
          c.num("optimizer.c")};
}

struct LogisticSetup {
  std::shared_ptr<const FiniteDatabase> train;
  std::shared_ptr<const FiniteDatabase> test;
  double eta = 0.0;
  double beta = 0.0;
};

inline LogisticSetup logistic_setup(const Config& c) {
  LogisticSetup s;
  const std::string csv = c.get("logistic.csv");
  FiniteDatabase all = csv.empty() ? synthetic_credit_database(c.u64("logistic.m"), c.u64("logistic.d"),
                                                               c.num("logistic.positive_rate"),
                                                               c.num("logistic.separation"), c.u64("logistic.data_seed"))
                                   : FiniteDatabase::load_csv(csv);
  auto [train, test] = all.split(c.num("logistic.test_fraction"), c.u64("logistic.data_seed"));
  s.train = std::make_shared<const FiniteDatabase>(std::move(train));
  s.test = std::make_shared<const FiniteDatabase>(std::move(test));
  s.eta = c.get("logistic.eta") == "auto" ? 100.0 / static_cast<double>(s.train->size()) : c.num("logistic.eta");
  s.beta = c.num("logistic.beta");
  return s;
}

inline std::size_t problem_dim(const Config& c) {
  const std::string kind = c.get("experiment.problem");
  if (kind == "logistic") {
    return c.get("logistic.csv").empty() ? c.u64("logistic.d") : logistic_setup(c).train->feature_dim();
  }
  return 1;
}

inline ParamVector theta0_from(const Config& c, std::size_t d) {
  auto v = c.list("experiment.theta0");
  if (v.size() == 1) return ParamVector(d, v[0]);
  if (v.size() != d) {
    throw Error(ErrorKind::config, "experiment.theta0 has " + std::to_string(v.size()) + " entries, model has " +
                                       std::to_string(d));
  }
  return ParamVector(std::move(v));
}

/// Loss, law and reference point for the configured problem.
inline Problem build_problem(const Config& c) {
  const std::string kind = c.get("experiment.problem");
  const std::string oracle = c.get("oracle.kind");
  if (oracle != "closed-form" && oracle != "rrm" && oracle != "none") {
    throw Error(ErrorKind::config, "oracle.kind must be closed-form, rrm or none");
  }
  RrmOptions rrm;
  rrm.tol = c.num("oracle.tol");
  rrm.expectation.saa_samples = c.u64("oracle.saa_samples");
  rrm.expectation.seed = c.u64("experiment.seed");

  Problem p;
  if (kind == "quadratic") {
    const auto q = quadratic_instance(c);
    p.loss = make_loss(q);
    p.dist = make_distribution(q);
    if (oracle == "closed-form") {
      p.reference = ParamVector{theta_ps_quadratic(q)};
    } else if (oracle == "rrm") {
      p.reference = solve_ps_rrm(*p.loss, *p.dist, rrm).theta;
    }
  } else if (kind == "nonconvex") {
    p.loss = bounded_nonconvex_loss();
    p.dist = bernoulli_tilted_shift(c.num("nonconvex.p0"), c.num("nonconvex.b"), c.num("nonconvex.beta"));
    if (oracle == "rrm" || oracle == "closed-form") {
      throw Error(ErrorKind::config, "nonconvex problem has no performatively stable oracle; use oracle.kind=none");
    }
    p.record_sps = true;
  } else if (kind == "logistic") {
    const auto s = logistic_setup(c);
    p.loss = regularized_logistic_loss(s.eta, s.train->feature_dim(), s.train->max_feature_norm());
    auto shifted = std::make_shared<const StrategicFeatureShift>(s.train, s.beta);
    p.dist = shifted;
    if (oracle == "closed-form") {
      throw Error(ErrorKind::config, "logistic problem has no closed-form oracle; use oracle.kind=rrm");
    }
    if (oracle == "rrm") p.reference = solve_ps_rrm(*p.loss, *p.dist, rrm).theta;
    auto test_shift = std::make_shared<const StrategicFeatureShift>(s.test, s.beta);
    p.extra = [test_shift](const ParamVector& th, TrialPoint& pt) {
      const Rates r = classification_rates(*test_shift, th.values());
      pt.tnr = r.tnr;
      pt.tpr = r.tpr;
    };
  } else {
    throw Error(ErrorKind::config, "experiment.problem must be quadratic, logistic or nonconvex (got '" + kind + "')");
  }
  p.reference_kind = p.reference ? oracle : "none";
  return p;
}

inline std::vector<Algorithm> algorithms(const Config& c) {
  std::vector<Algorithm> out;
  for (const auto& w : c.words("experiment.algorithm")) out.push_back(parse_algorithm(w));
  if (out.empty()) throw Error(ErrorKind::config, "experiment.algorithm is empty");
  return out;
}

/// Resolved sigma_dp: calibrated from the privacy budget when enabled
/// (threshold c for PCSGD/SGD, C1 for DiceSGD), else the literal value.
inline double resolved_sigma_dp(const Config& c, Algorithm alg) {
  if (!c.flag("privacy.enabled")) return c.num("optimizer.sigma_dp");
  PrivacyBudget b{c.num("privacy.epsilon"), c.num("privacy.delta"), c.num("privacy.m"),
                  static_cast<double>(c.u64("experiment.T")), problem_dim(c)};
  const double clip = alg == Algorithm::dicesgd ? c.num("optimizer.c1") : c.num("optimizer.c");
  return dp_sigma(clip, b, {c.flag("privacy.strict")});
}

inline ExperimentConfig build_experiment(const Config& c, Algorithm alg, const Problem& prob) {
  ExperimentConfig e;
  e.algorithm = alg;
  e.T = c.u64("experiment.T");
  e.n_trials = c.u64("experiment.trials");
  e.seed = c.u64("experiment.seed");
  e.thin = c.u64("experiment.thin");
  e.workers = c.u64("experiment.workers");
  const std::size_t d = prob.loss->dim();
  e.theta0 = theta0_from(c, d);
  auto& o = e.optimizer;
  o.clip_c = c.num("optimizer.c");
  o.clip_c1 = c.num("optimizer.c1");
  o.clip_c2 = c.num("optimizer.c2");
  o.dp_multiplier = c.num("optimizer.dp_multiplier");
  o.sigma_dp = resolved_sigma_dp(c, alg);
  const std::string region = c.get("optimizer.region");
  if (region == "box") {
    if (alg != Algorithm::dicesgd) o.region = BoxRegion::uniform(d, c.num("optimizer.lower"), c.num("optimizer.upper"));
  } else if (region != "none") {
    throw Error(ErrorKind::config, "optimizer.region must be box or none");
  }
  const std::string sched = c.get("optimizer.schedule");
  if (sched == "constant") {
    o.schedule = StepSchedule::constant(c.num("optimizer.gamma"));
  } else if (sched == "polynomial") {
    o.schedule = StepSchedule::polynomial(c.num("optimizer.a0"), c.num("optimizer.a1"));
  } else if (sched == "optimal") {
    if (c.get("experiment.problem") != "quadratic") {
      throw Error(ErrorKind::config, "optimizer.schedule=optimal is only available for the quadratic problem");
    }
    const auto q = quadratic_instance(c);
    const double ps = theta_ps_quadratic(q);
    OptimalStepInputs in{1.0 - std::max(1.0, q.a) * q.beta, e.T, o.clip_c,
                         quadratic_grad_bound(q, c.num("optimizer.lower"), c.num("optimizer.upper")), 1, o.sigma_dp,
                         (e.theta0[0] - ps) * (e.theta0[0] - ps)};
    o.schedule = optimal_schedule(in);
  } else {
    throw Error(ErrorKind::config, "optimizer.schedule must be constant, polynomial or optimal");
  }
  return e;
}

inline QuadraticExperiment quadratic_experiment(const Config& c) {
  QuadraticExperiment q;
  q.inst = quadratic_instance(c);
  q.box_lo = c.num("optimizer.lower");
  q.box_hi = c.num("optimizer.upper");
  q.theta0 = c.list("experiment.theta0").front();
  q.schedule = StepSchedule::polynomial(c.num("optimizer.a0"), c.num("optimizer.a1"));
  if (c.get("optimizer.schedule") == "constant") q.schedule = StepSchedule::constant(c.num("optimizer.gamma"));
  q.T = c.u64("experiment.T");
  q.n_trials = c.u64("experiment.trials");
  q.seed = c.u64("experiment.seed");
  q.thin = c.u64("experiment.thin");
  q.workers = c.u64("experiment.workers");
  return q;
}

}  // namespace ppclip

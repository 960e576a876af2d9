#pragma once

#include <cmath>
#include <cstddef>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "ppclip/core.hpp"
#include "ppclip/losses.hpp"
#include "ppclip/random.hpp"

namespace ppclip {

struct WeightedSample {
  Sample z;
  double prob = 0.0;
};

using Support = std::vector<WeightedSample>;

/// A decision-dependent law z ~ D(theta). Implementations are immutable;
/// randomness comes only from the caller's stream.
class DecisionDistribution {
 public:
  virtual ~DecisionDistribution() = default;

  virtual std::string name() const = 0;

  /// Draw z ~ D(theta) into `out`, reusing its storage.
  virtual void sample(std::span<const double> theta, RandomStream& rng, Sample& out) const = 0;

  /// Declared sensitivity of theta -> D(theta).
  virtual double beta() const = 0;

  /// Finite support of D(theta) when it can be enumerated.
  virtual std::optional<Support> support(std::span<const double> /*theta*/) const {
    return std::nullopt;
  }

  Sample sample(std::span<const double> theta, RandomStream& rng) const {
    Sample s;
    sample(theta, rng, s);
    return s;
  }
};

using DistributionPtr = std::shared_ptr<const DecisionDistribution>;

// ---------------------------------------------------------------------------
// Finite database
// ---------------------------------------------------------------------------

class FiniteDatabase {
 public:
  explicit FiniteDatabase(std::vector<Sample> records) : records_(std::move(records)) {
    require(!records_.empty(), ErrorKind::invalid_input, "FiniteDatabase: empty database");
    const std::size_t d = records_.front().x.size();
    for (const auto& r : records_) {
      require(r.x.size() == d, ErrorKind::invalid_input, "FiniteDatabase: ragged records");
      require(all_finite(r.x), ErrorKind::invalid_input, "FiniteDatabase: non-finite entry");
      require(r.label == -1 || r.label == 0 || r.label == 1, ErrorKind::invalid_input,
              "FiniteDatabase: labels must be 0 or 1");
    }
  }

  std::size_t size() const noexcept { return records_.size(); }
  std::size_t feature_dim() const noexcept { return records_.front().x.size(); }
  const Sample& operator[](std::size_t i) const { return records_[i]; }
  const std::vector<Sample>& records() const noexcept { return records_; }

  double max_feature_norm() const {
    double r = 0.0;
    for (const auto& s : records_) r = std::max(r, norm(s.x));
    return r;
  }

  double positive_fraction() const {
    std::size_t pos = 0;
    for (const auto& s : records_) pos += (s.label == 1);
    return static_cast<double>(pos) / static_cast<double>(records_.size());
  }

  /// CSV with a header row; numeric columns parsed as doubles. With
  /// `labeled`, the final column is the 0/1 label.
  static FiniteDatabase load_csv(const std::string& path, bool labeled = true) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::io, "cannot open database file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw Error(ErrorKind::io, "empty database file: " + path);
    std::vector<Sample> records;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.find_first_not_of(" \t") == std::string::npos) continue;
      std::vector<double> cols;
      std::stringstream ss(line);
      std::string cell;
      while (std::getline(ss, cell, ',')) {
        try {
          std::size_t used = 0;
          cols.push_back(std::stod(cell, &used));
          if (cell.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(cell);
        } catch (const std::exception&) {
          throw Error(ErrorKind::invalid_input,
                      path + ":" + std::to_string(lineno) + ": non-numeric cell '" + cell + "'");
        }
      }
      Sample s;
      if (labeled) {
        require(cols.size() >= 2, ErrorKind::invalid_input,
                path + ":" + std::to_string(lineno) + ": need at least one feature and a label");
        const double y = cols.back();
        require(y == 0.0 || y == 1.0, ErrorKind::invalid_input,
                path + ":" + std::to_string(lineno) + ": label must be 0 or 1");
        s.label = static_cast<int>(y);
        cols.pop_back();
      }
      s.x = std::move(cols);
      records.push_back(std::move(s));
    }
    require(!records.empty(), ErrorKind::invalid_input, "database file has no records: " + path);
    return FiniteDatabase(std::move(records));
  }

  /// Split off the last `fraction` of records (after a seeded shuffle).
  std::pair<FiniteDatabase, FiniteDatabase> split(double test_fraction, std::uint64_t seed) const {
    require(test_fraction > 0.0 && test_fraction < 1.0, ErrorKind::invalid_input,
            "FiniteDatabase::split: fraction must lie in (0,1)");
    std::vector<std::size_t> idx(records_.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    RandomStream rng(seed, 0, stream_tag::dataset + 1);
    rng.seek_step(0);
    for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
    const auto n_test = static_cast<std::size_t>(std::round(test_fraction * idx.size()));
    require(n_test >= 1 && n_test < idx.size(), ErrorKind::invalid_input,
            "FiniteDatabase::split: split leaves an empty side");
    std::vector<Sample> train, test;
    for (std::size_t i = 0; i < idx.size(); ++i) {
      (i < idx.size() - n_test ? train : test).push_back(records_[idx[i]]);
    }
    return {FiniteDatabase(std::move(train)), FiniteDatabase(std::move(test))};
  }

 private:
  std::vector<Sample> records_;
};

/// Imbalanced two-class Gaussian data standing in for a credit-default
/// table: x | y ~ N(y * separation * u, I_d / d) with a fixed unit
/// direction u, and P(y = 1) = positive_rate.
inline FiniteDatabase synthetic_credit_database(std::size_t m, std::size_t d, double positive_rate,
                                                double separation, std::uint64_t seed) {
  require(m >= 2 && d >= 1, ErrorKind::invalid_input, "synthetic_credit_database: m >= 2, d >= 1");
  require(positive_rate > 0.0 && positive_rate < 1.0, ErrorKind::invalid_input,
          "synthetic_credit_database: positive_rate must lie in (0,1)");
  RandomStream rng(seed, 0, stream_tag::dataset);
  std::vector<double> dir(d);
  rng.seek_step(0);
  for (auto& v : dir) v = rng.normal();
  const double dn = norm(dir);
  for (auto& v : dir) v /= dn;
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  std::vector<Sample> records(m);
  for (std::size_t i = 0; i < m; ++i) {
    rng.seek_step(i + 1);
    Sample& s = records[i];
    s.label = rng.uniform() < positive_rate ? 1 : 0;
    s.x.resize(d);
    for (std::size_t k = 0; k < d; ++k) {
      s.x[k] = scale * rng.normal() + (s.label == 1 ? separation * dir[k] : 0.0);
    }
  }
  return FiniteDatabase(std::move(records));
}

// ---------------------------------------------------------------------------
// Concrete laws
// ---------------------------------------------------------------------------

/// Z = b * Bernoulli(p) - beta * theta (scalar theta).
class BernoulliLinearShift final : public DecisionDistribution {
 public:
  BernoulliLinearShift(double p, double b, double beta) : p_(p), b_(b), beta_(beta) {
    require(p > 0.0 && p < 0.5, ErrorKind::invalid_input,
            "bernoulli_linear_shift: p must lie in (0, 1/2)");
    require(std::isfinite(b), ErrorKind::invalid_input, "bernoulli_linear_shift: b must be finite");
    require(beta >= 0.0 && std::isfinite(beta), ErrorKind::invalid_input,
            "bernoulli_linear_shift: beta must be nonnegative");
  }

  std::string name() const override { return "bernoulli"; }
  double beta() const override { return beta_; }
  double p() const noexcept { return p_; }
  double b() const noexcept { return b_; }

  void sample(std::span<const double> theta, RandomStream& rng, Sample& out) const override {
    const double bit = rng.uniform() < p_ ? 1.0 : 0.0;
    out.x.resize(1);
    out.x[0] = b_ * bit - beta_ * theta[0];
    out.label = -1;
  }

  std::optional<Support> support(std::span<const double> theta) const override {
    const double shift = -beta_ * theta[0];
    return Support{{Sample{{shift}, -1}, 1.0 - p_}, {Sample{{b_ + shift}, -1}, p_}};
  }

 private:
  double p_, b_, beta_;
};

/// Z = b * Bernoulli(p0 + beta * tanh(theta)): the success probability
/// moves with the decision, so TV(D(theta), D(theta')) <= beta |theta - theta'|.
/// Used for the non-convex instance, whose analysis measures sensitivity in
/// total variation rather than Wasserstein distance.
class BernoulliTiltedShift final : public DecisionDistribution {
 public:
  BernoulliTiltedShift(double p0, double b, double beta) : p0_(p0), b_(b), beta_(beta) {
    require(p0 > 0.0 && p0 < 1.0, ErrorKind::invalid_input, "bernoulli_tilted: p0 must lie in (0,1)");
    require(beta >= 0.0 && beta <= std::min(p0, 1.0 - p0), ErrorKind::invalid_input,
            "bernoulli_tilted: beta must lie in [0, min(p0, 1-p0)]");
  }

  std::string name() const override { return "tilted"; }
  double beta() const override { return beta_; }

  double success_prob(double theta) const { return p0_ + beta_ * std::tanh(theta); }

  void sample(std::span<const double> theta, RandomStream& rng, Sample& out) const override {
    out.x.resize(1);
    out.x[0] = rng.uniform() < success_prob(theta[0]) ? b_ : 0.0;
    out.label = -1;
  }

  std::optional<Support> support(std::span<const double> theta) const override {
    const double q = success_prob(theta[0]);
    return Support{{Sample{{0.0}, -1}, 1.0 - q}, {Sample{{b_}, -1}, q}};
  }

 private:
  double p0_, b_, beta_;
};

/// Additive shift s_i(theta) applied to record i's features.
using ShiftMap = std::function<void(std::size_t index, const Sample& base,
                                    std::span<const double> theta, std::span<double> shift)>;

/// Z = z_i + s_i(theta), i ~ Unif([m]).
class FiniteDatabaseShift : public DecisionDistribution {
 public:
  FiniteDatabaseShift(std::shared_ptr<const FiniteDatabase> db, ShiftMap shift, double beta,
                      bool deterministic = true)
      : db_(std::move(db)), shift_(std::move(shift)), beta_(beta), deterministic_(deterministic) {
    require(db_ != nullptr && db_->size() >= 1, ErrorKind::invalid_input,
            "finite_database_shift: empty database");
    require(beta >= 0.0, ErrorKind::invalid_input, "finite_database_shift: beta must be nonnegative");
  }

  std::string name() const override { return "database"; }
  double beta() const override { return beta_; }
  const FiniteDatabase& database() const noexcept { return *db_; }

  void sample(std::span<const double> theta, RandomStream& rng, Sample& out) const override {
    materialize(rng.below(db_->size()), theta, out);
  }

  std::optional<Support> support(std::span<const double> theta) const override {
    if (!deterministic_) return std::nullopt;
    Support s(db_->size());
    const double w = 1.0 / static_cast<double>(db_->size());
    for (std::size_t i = 0; i < db_->size(); ++i) {
      materialize(i, theta, s[i].z);
      s[i].prob = w;
    }
    return s;
  }

  void materialize(std::size_t i, std::span<const double> theta, Sample& out) const {
    const Sample& base = (*db_)[i];
    out.x.assign(base.x.begin(), base.x.end());
    out.label = base.label;
    if (shift_) {
      thread_local std::vector<double> buf;
      buf.assign(base.x.size(), 0.0);
      shift_(i, base, theta, buf);
      for (std::size_t k = 0; k < buf.size(); ++k) out.x[k] += buf[k];
    }
  }

 private:
  std::shared_ptr<const FiniteDatabase> db_;
  ShiftMap shift_;
  double beta_;
  bool deterministic_;
};

/// Strategic best response x = xbar - beta * y * theta: the maximiser of
/// -y <theta, x> - ||x - xbar||^2 / (2 beta). Negative records never move.
class StrategicFeatureShift final : public DecisionDistribution {
 public:
  StrategicFeatureShift(std::shared_ptr<const FiniteDatabase> db, double beta)
      : db_(std::move(db)), beta_(beta) {
    require(db_ != nullptr && db_->size() >= 1, ErrorKind::invalid_input,
            "strategic_feature_shift: empty database");
    require(beta >= 0.0 && std::isfinite(beta), ErrorKind::invalid_input,
            "strategic_feature_shift: beta must be nonnegative");
    for (const auto& r : db_->records()) {
      require(r.has_label(), ErrorKind::invalid_input, "strategic_feature_shift: records need labels");
    }
  }

  std::string name() const override { return "strategic"; }
  double beta() const override { return beta_; }
  const FiniteDatabase& database() const noexcept { return *db_; }

  void respond(const Sample& base, std::span<const double> theta, Sample& out) const {
    require(theta.size() == base.x.size(), ErrorKind::invalid_input,
            "strategic_feature_shift: feature dimension does not match model dimension");
    out.x.assign(base.x.begin(), base.x.end());
    out.label = base.label;
    if (base.label == 1 && beta_ != 0.0) axpy(-beta_, theta, out.x);
  }

  void sample(std::span<const double> theta, RandomStream& rng, Sample& out) const override {
    respond((*db_)[rng.below(db_->size())], theta, out);
  }

  std::optional<Support> support(std::span<const double> theta) const override {
    Support s(db_->size());
    const double w = 1.0 / static_cast<double>(db_->size());
    for (std::size_t i = 0; i < db_->size(); ++i) {
      respond((*db_)[i], theta, s[i].z);
      s[i].prob = w;
    }
    return s;
  }

 private:
  std::shared_ptr<const FiniteDatabase> db_;
  double beta_;
};

inline DistributionPtr bernoulli_linear_shift(double p, double b, double beta) {
  return std::make_shared<BernoulliLinearShift>(p, b, beta);
}

inline DistributionPtr bernoulli_tilted_shift(double p0, double b, double beta) {
  return std::make_shared<BernoulliTiltedShift>(p0, b, beta);
}

inline DistributionPtr finite_database_shift(std::shared_ptr<const FiniteDatabase> db,
                                             ShiftMap shift, double beta, bool deterministic = true) {
  return std::make_shared<FiniteDatabaseShift>(std::move(db), std::move(shift), beta, deterministic);
}

inline DistributionPtr strategic_feature_shift(std::shared_ptr<const FiniteDatabase> db, double beta) {
  return std::make_shared<StrategicFeatureShift>(std::move(db), beta);
}

// ---------------------------------------------------------------------------
// Exact expectations over an enumerable support
// ---------------------------------------------------------------------------

inline Support require_support(const DecisionDistribution& dist, std::span<const double> theta) {
  auto s = dist.support(theta);
  if (!s) {
    throw Error(ErrorKind::unsupported,
                "distribution '" + dist.name() + "' has no enumerable support; use Monte-Carlo");
  }
  return std::move(*s);
}

/// sum_k p_k clip_c(grad(theta, z_k)); c = +inf gives the plain expected gradient.
inline std::vector<double> exact_expected_clipped_grad(const DecisionDistribution& dist,
                                                       const LossModel& loss,
                                                       std::span<const double> theta, double c) {
  const Support sup = require_support(dist, theta);
  std::vector<double> acc(loss.dim(), 0.0), g(loss.dim());
  for (const auto& [z, p] : sup) {
    loss.grad(theta, z, g);
    const double s = clip_scale(norm(g), c);
    axpy(p * s, g, acc);
  }
  return acc;
}

/// grad_theta f(theta; theta_dist) = E_{Z ~ D(theta_dist)} grad l(theta; Z)
inline std::vector<double> exact_expected_grad(const DecisionDistribution& dist, const LossModel& loss,
                                               std::span<const double> theta,
                                               std::span<const double> theta_dist) {
  const Support sup = require_support(dist, theta_dist);
  std::vector<double> acc(loss.dim(), 0.0), g(loss.dim());
  for (const auto& [z, p] : sup) {
    loss.grad(theta, z, g);
    axpy(p, g, acc);
  }
  return acc;
}

/// f(theta; theta_dist) = E_{Z ~ D(theta_dist)} l(theta; Z)
inline double exact_expected_loss(const DecisionDistribution& dist, const LossModel& loss,
                                  std::span<const double> theta, std::span<const double> theta_dist) {
  const Support sup = require_support(dist, theta_dist);
  double acc = 0.0;
  for (const auto& [z, p] : sup) acc += p * loss.loss(theta, z);
  return acc;
}

/// E ||grad l(theta; Z) - grad f(theta; theta)||^2 with Z ~ D(theta).
inline double exact_grad_variance(const DecisionDistribution& dist, const LossModel& loss,
                                  std::span<const double> theta) {
  const Support sup = require_support(dist, theta);
  const std::vector<double> mean = exact_expected_grad(dist, loss, theta, theta);
  std::vector<double> g(loss.dim());
  double v = 0.0;
  for (const auto& [z, p] : sup) {
    loss.grad(theta, z, g);
    v += p * distance_sq(g, mean);
  }
  return v;
}

}  // namespace ppclip

#pragma once

#include <cmath>
#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ppclip/core.hpp"

namespace ppclip {

/// One observation. Scalar observations (the quadratic and non-convex
/// models) use x of size 1 and no label; labelled records carry y in {0,1}.
struct Sample {
  std::vector<double> x;
  int label = -1;

  bool has_label() const noexcept { return label >= 0; }
};

/// Constants a loss declares about itself. Optional entries are unknown
/// until a harness measures them; nothing downstream invents defaults.
struct LossConstants {
  double mu = 0.0;           ///< strong convexity in theta (0: none)
  double lipschitz = 0.0;    ///< joint Lipschitz constant of grad in (theta, z)
  double smoothness = 0.0;   ///< Lipschitz constant of grad in theta alone
  double lipschitz_z = 0.0;  ///< Lipschitz constant of grad in z alone
  std::optional<double> grad_bound;
  std::optional<double> loss_bound;
  double loss_floor = 0.0;
  std::optional<double> sigma0;
  std::optional<double> sigma1;
};

class LossModel {
 public:
  virtual ~LossModel() = default;

  virtual std::string name() const = 0;
  virtual std::size_t dim() const = 0;
  virtual double loss(std::span<const double> theta, const Sample& z) const = 0;
  virtual void grad(std::span<const double> theta, const Sample& z, std::span<double> out) const = 0;

  std::vector<double> grad(std::span<const double> theta, const Sample& z) const {
    std::vector<double> g(dim());
    grad(theta, z, g);
    return g;
  }

  const LossConstants& constants() const noexcept { return constants_; }

 protected:
  LossConstants constants_;
};

using LossPtr = std::shared_ptr<const LossModel>;

namespace detail {

inline double softplus(double u) {
  // log(1 + e^u) without overflow
  return u > 0.0 ? u + std::log1p(std::exp(-u)) : std::log1p(std::exp(u));
}

inline double sigmoid(double u) {
  if (u >= 0.0) return 1.0 / (1.0 + std::exp(-u));
  const double e = std::exp(u);
  return e / (1.0 + e);
}

}  // namespace detail

/// l(theta; z) = (theta + a z)^2 / 2 on scalar theta.
class QuadraticScalarLoss final : public LossModel {
 public:
  explicit QuadraticScalarLoss(double a) : a_(a) {
    require(a > 0.0 && std::isfinite(a), ErrorKind::invalid_input,
            "quadratic_scalar_loss: a must be positive");
    constants_.mu = 1.0;
    constants_.smoothness = 1.0;
    constants_.lipschitz_z = a;
    constants_.lipschitz = std::max(1.0, a);
    constants_.loss_floor = 0.0;
  }

  std::string name() const override { return "quadratic"; }
  std::size_t dim() const override { return 1; }
  double a() const noexcept { return a_; }

  double loss(std::span<const double> theta, const Sample& z) const override {
    const double r = theta[0] + a_ * z.x[0];
    return 0.5 * r * r;
  }

  void grad(std::span<const double> theta, const Sample& z, std::span<double> out) const override {
    out[0] = theta[0] + a_ * z.x[0];
  }

 private:
  double a_;
};

/// Label-weighted ridge logistic loss
///   (y+1) (log(1+exp(x'theta)) - y x'theta) + (eta/2)||theta||^2.
/// `feature_radius` bounds ||x|| over the data and sets the declared
/// smoothness (y+1)/4 R^2 + eta <= R^2/2 + eta.
class RegularizedLogisticLoss final : public LossModel {
 public:
  RegularizedLogisticLoss(double eta, std::size_t d, double feature_radius = 1.0)
      : eta_(eta), d_(d) {
    require(eta > 0.0 && std::isfinite(eta), ErrorKind::invalid_input,
            "regularized_logistic_loss: eta must be positive");
    require(d >= 1, ErrorKind::invalid_input, "regularized_logistic_loss: d must be >= 1");
    require(feature_radius > 0.0, ErrorKind::invalid_input,
            "regularized_logistic_loss: feature_radius must be positive");
    constants_.mu = eta;
    constants_.smoothness = 0.5 * feature_radius * feature_radius + eta;
    constants_.lipschitz = constants_.smoothness;
    constants_.loss_floor = 0.0;
  }

  std::string name() const override { return "logistic"; }
  std::size_t dim() const override { return d_; }
  double eta() const noexcept { return eta_; }

  double loss(std::span<const double> theta, const Sample& z) const override {
    const double u = dot(z.x, theta);
    const double y = z.label;
    return (y + 1.0) * (detail::softplus(u) - y * u) + 0.5 * eta_ * norm_sq(theta);
  }

  void grad(std::span<const double> theta, const Sample& z, std::span<double> out) const override {
    const double u = dot(z.x, theta);
    const double y = z.label;
    const double w = (y + 1.0) * (detail::sigmoid(u) - y);
    for (std::size_t i = 0; i < d_; ++i) out[i] = w * z.x[i] + eta_ * theta[i];
  }

 private:
  double eta_;
  std::size_t d_;
};

/// l(theta; z) = 1 - exp(-(theta - z)^2 / 2): smooth, bounded in [0, 1),
/// non-convex. |grad| peaks at exp(-1/2) when |theta - z| = 1.
class BoundedNonconvexLoss final : public LossModel {
 public:
  BoundedNonconvexLoss() {
    constants_.mu = 0.0;
    constants_.smoothness = 1.0;
    constants_.lipschitz_z = 1.0;
    constants_.lipschitz = 1.0;
    constants_.grad_bound = std::exp(-0.5);
    constants_.loss_bound = 1.0;
    constants_.loss_floor = 0.0;
  }

  std::string name() const override { return "nonconvex"; }
  std::size_t dim() const override { return 1; }

  double loss(std::span<const double> theta, const Sample& z) const override {
    const double r = theta[0] - z.x[0];
    return -std::expm1(-0.5 * r * r);
  }

  void grad(std::span<const double> theta, const Sample& z, std::span<double> out) const override {
    const double r = theta[0] - z.x[0];
    out[0] = r * std::exp(-0.5 * r * r);
  }
};

inline LossPtr quadratic_scalar_loss(double a) { return std::make_shared<QuadraticScalarLoss>(a); }

inline LossPtr regularized_logistic_loss(double eta, std::size_t d, double feature_radius = 1.0) {
  return std::make_shared<RegularizedLogisticLoss>(eta, d, feature_radius);
}

inline LossPtr bounded_nonconvex_loss() { return std::make_shared<BoundedNonconvexLoss>(); }

/// max_i |(l(theta + h e_i) - l(theta - h e_i)) / 2h - grad_i| / (1 + |grad_i|)
inline double grad_check_fd(const LossModel& model, std::span<const double> theta,
                            const Sample& z, double h) {
  require(h > 0.0, ErrorKind::invalid_input, "grad_check_fd: h must be positive");
  const std::vector<double> g = model.grad(theta, z);
  std::vector<double> probe(theta.begin(), theta.end());
  double worst = 0.0;
  for (std::size_t i = 0; i < probe.size(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + h;
    const double up = model.loss(probe, z);
    probe[i] = orig - h;
    const double down = model.loss(probe, z);
    probe[i] = orig;
    const double fd = (up - down) / (2.0 * h);
    worst = std::max(worst, std::abs(fd - g[i]) / (1.0 + std::abs(g[i])));
  }
  return worst;
}

}  // namespace ppclip

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "ppclip/oracles.hpp"

using namespace ppclip;

namespace {

QuadraticInstance base_instance(double beta = 0.01) { return {0.1, 10.0, 1.0, beta, 1.0}; }

double clipped_residual(const QuadraticInstance& q, double theta) {
  auto loss = make_loss(q);
  auto dist = make_distribution(q);
  const double th[1] = {theta};
  return exact_expected_clipped_grad(*dist, *loss, th, q.c)[0];
}

}  // namespace

TEST(QuadraticOracle, ThetaPsMatchesArithmetic) {
  EXPECT_NEAR(theta_ps_quadratic(base_instance()), -1.0 / 0.9, 1e-12);
  EXPECT_NEAR(theta_ps_quadratic(base_instance()), -1.11111, 1e-5);
}

TEST(QuadraticOracle, ThetaPsStaticCase) {
  auto q = base_instance(0.0);
  EXPECT_DOUBLE_EQ(theta_ps_quadratic(q), -q.p * q.a);
}

TEST(QuadraticOracle, ThetaPsZeroesExpectedGradient) {
  for (double beta : {0.0, 0.01, 0.05, 0.09}) {
    auto q = base_instance(beta);
    const double ps = theta_ps_quadratic(q);
    const double th[1] = {ps};
    auto g = exact_expected_grad(*make_distribution(q), *make_loss(q), th, th);
    EXPECT_NEAR(g[0], 0.0, 1e-12) << "beta=" << beta;
  }
}

TEST(QuadraticOracle, ThetaPsCarriesB) {
  QuadraticInstance q{0.1, 2.0, 3.0, 0.1, 1.0};
  const double ps = theta_ps_quadratic(q);
  EXPECT_NEAR(ps, -0.1 * 2.0 * 3.0 / 0.8, 1e-12);
  const double th[1] = {ps};
  EXPECT_NEAR(exact_expected_grad(*make_distribution(q), *make_loss(q), th, th)[0], 0.0, 1e-12);
}

TEST(QuadraticOracle, IllPosedRejected) {
  auto q = base_instance(0.1);  // a beta = 1
  EXPECT_THROW(theta_ps_quadratic(q), Error);
}

TEST(QuadraticOracle, ThetaInfArithmetic) {
  EXPECT_NEAR(theta_inf_quadratic(base_instance()), -0.1 / (0.9 * 0.9), 1e-12);
  EXPECT_NEAR(theta_inf_quadratic(base_instance()), -0.12346, 1e-5);
}

TEST(QuadraticOracle, ThetaInfZeroesClippedExpectation) {
  auto q = base_instance();
  EXPECT_NEAR(clipped_residual(q, theta_inf_quadratic(q)), 0.0, 1e-12);
}

TEST(QuadraticOracle, ThetaInfAtBoundaryAbEquals2c) {
  QuadraticInstance q{0.1, 10.0, 1.0, 0.01, 5.0};  // ab = 2c
  EXPECT_NEAR(clipped_residual(q, theta_inf_quadratic(q)), 0.0, 1e-12);
}

TEST(QuadraticOracle, ThetaInfRequiresAbAtLeast2c) {
  QuadraticInstance q{0.1, 10.0, 1.0, 0.01, 6.0};
  EXPECT_THROW(theta_inf_quadratic(q), Error);
  EXPECT_THROW(quadratic_bias(q), Error);
}

TEST(QuadraticOracle, BiasArithmeticAndIdentity) {
  auto q = base_instance();
  const double d = theta_inf_quadratic(q) - theta_ps_quadratic(q);
  EXPECT_NEAR(quadratic_bias(q), 0.97547, 1e-4);
  EXPECT_NEAR(quadratic_bias(q), d * d, 1e-12);
}

// c = a(1-p) zeroes the inner factor but breaks ab >= 2c whenever p < 1/2,
// so the closed form refuses the instance rather than reporting 0.
TEST(QuadraticOracle, AbsorbingThresholdOutsideValidFamily) {
  QuadraticInstance q{0.1, 10.0, 1.0, 0.01, 10.0 * 0.9};
  EXPECT_THROW(quadratic_bias(q), Error);
}

TEST(QuadraticOracle, BiasIncreasingInBeta) {
  double prev = -1.0;
  for (double beta : {0.0, 0.02, 0.04, 0.06, 0.08}) {
    const double b = quadratic_bias(base_instance(beta));
    EXPECT_GT(b, prev);
    prev = b;
  }
}

TEST(QuadraticOracle, IdentityOnRandomInstances) {
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  int checked = 0;
  while (checked < 20) {
    QuadraticInstance q{0.01 + 0.48 * U(gen), 0.5 + 10 * U(gen), 0.5 + 3 * U(gen), 0.0, 0.1 + 2 * U(gen)};
    q.beta = 0.95 * U(gen) / q.a;
    if (q.a * q.b < 2 * q.c) continue;
    const double d = theta_inf_quadratic(q) - theta_ps_quadratic(q);
    EXPECT_NEAR(quadratic_bias(q), d * d, 1e-12 * std::max(1.0, d * d));
    EXPECT_LT(std::abs(theta_inf_quadratic(q)), std::abs(theta_ps_quadratic(q)));
    ++checked;
  }
}

TEST(QuadraticOracle, GradBoundAtCorners) {
  auto q = base_instance();
  EXPECT_NEAR(quadratic_grad_bound(q, -10, 10), 0.9 * 10 + 10, 1e-12);
}

TEST(RrmOracle, MatchesClosedFormQuadratic) {
  for (double beta : {0.01, 0.05}) {
    auto q = base_instance(beta);
    RrmOptions o;
    o.tol = 1e-8;
    auto r = solve_ps_rrm(*make_loss(q), *make_distribution(q), o);
    EXPECT_NEAR(r.theta[0], theta_ps_quadratic(q), 1e-8);
    EXPECT_LT(r.residual, 1e-7);
  }
}

TEST(RrmOracle, StaticCaseOneOuterStep) {
  auto q = base_instance(0.0);
  auto r = solve_ps_rrm(*make_loss(q), *make_distribution(q));
  EXPECT_LE(r.outer_iterations, 2u);  // one move, one confirming step
  EXPECT_NEAR(r.theta[0], theta_ps_quadratic(q), 1e-12);
}

TEST(RrmOracle, GapsDecreaseMonotonically) {
  auto q = base_instance(0.05);
  auto r = solve_ps_rrm(*make_loss(q), *make_distribution(q));
  for (std::size_t k = 1; k < r.gaps.size(); ++k) EXPECT_LE(r.gaps[k], r.gaps[k - 1]);
}

TEST(RrmOracle, NonConvergenceReported) {
  auto q = base_instance(0.05);
  RrmOptions o;
  o.max_outer = 2;
  o.tol = 1e-14;
  try {
    solve_ps_rrm(*make_loss(q), *make_distribution(q), o);
    FAIL() << "expected non-convergence";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::non_convergence);
    EXPECT_NE(std::string(e.what()).find("last gap"), std::string::npos);
  }
}

TEST(RrmOracle, LogisticSyntheticResidual) {
  auto db = std::make_shared<const FiniteDatabase>(synthetic_credit_database(50, 3, 0.3, 1.5, 3));
  auto loss = regularized_logistic_loss(100.0 / 50, 3, db->max_feature_norm());
  auto dist = strategic_feature_shift(db, 0.01);
  auto r = solve_ps_rrm(*loss, *dist);
  const auto g = exact_expected_grad(*dist, *loss, r.theta.values(), r.theta.values());
  EXPECT_LE(norm(g), 1e-6);
}

TEST(RrmOracle, SampleAverageFallback) {
  // Non-enumerable law: the same Bernoulli shift, support hidden.
  struct Hidden final : DecisionDistribution {
    BernoulliLinearShift inner{0.1, 1.0, 0.01};
    std::string name() const override { return "hidden"; }
    double beta() const override { return 0.01; }
    void sample(std::span<const double> th, RandomStream& rng, Sample& out) const override { inner.sample(th, rng, out); }
  } hidden;
  auto loss = quadratic_scalar_loss(10.0);
  RrmOptions o;
  o.tol = 1e-6;
  o.expectation.saa_samples = 100000;
  auto r = solve_ps_rrm(*loss, hidden, o);
  // SAA error ~ a * sqrt(p(1-p)/N) / (1 - a beta)
  EXPECT_NEAR(r.theta[0], theta_ps_quadratic(base_instance()), 0.02);
}

TEST(ClippedFixedPoint, MatchesClosedForm) {
  for (double beta : {0.01, 0.05}) {
    auto q = base_instance(beta);
    auto r = solve_clipped_fixed_point(*make_loss(q), *make_distribution(q), q.c);
    EXPECT_NEAR(r.theta[0], theta_inf_quadratic(q), 1e-8);
    EXPECT_LE(r.residual, 1e-12);
  }
}

TEST(ClippedFixedPoint, LargeThresholdMatchesRrm) {
  auto q = base_instance(0.05);
  auto loss = make_loss(q);
  auto dist = make_distribution(q);
  auto fp = solve_clipped_fixed_point(*loss, *dist, 1e6);
  auto ps = solve_ps_rrm(*loss, *dist);
  EXPECT_NEAR(fp.theta[0], ps.theta[0], 1e-8);
}

TEST(ClippedFixedPoint, SymmetricLawCenter) {
  // z in {-1, +1} with equal mass: gradients theta +- 3. With c = 4 the
  // clipped field is theta on [-1, 1] and keeps its sign outside, so the
  // symmetric center is the only root. (For c < 3 every point between the
  // two kinks is a root.)
  auto db = std::make_shared<const FiniteDatabase>(std::vector<Sample>{Sample{{-1.0}, -1}, Sample{{1.0}, -1}});
  auto dist = finite_database_shift(db, nullptr, 0.0);
  auto loss = quadratic_scalar_loss(3.0);
  FixedPointOptions o;
  o.theta0 = ParamVector{1.7};
  auto r = solve_clipped_fixed_point(*loss, *dist, 4.0, o);
  EXPECT_NEAR(r.theta[0], 0.0, 1e-10);
}

TEST(ClippedFixedPoint, DampedIterationMultiD) {
  auto db = std::make_shared<const FiniteDatabase>(synthetic_credit_database(40, 2, 0.3, 1.5, 5));
  auto loss = regularized_logistic_loss(2.5, 2, db->max_feature_norm());
  auto dist = strategic_feature_shift(db, 0.01);
  FixedPointOptions o;
  o.tol = 1e-9;
  auto r = solve_clipped_fixed_point(*loss, *dist, 0.5, o);
  const auto h = clipped_field(*loss, *dist, r.theta.values(), 0.5);
  EXPECT_LE(norm(h), 1e-9);
}

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "ppclip/core.hpp"

using namespace ppclip;

TEST(Clip, IdentityBelowThreshold) {
  const std::vector<double> g{0.3, 0.4};
  EXPECT_EQ(clip(g, 1.0), g);
}

TEST(Clip, ScalesToThreshold) {
  const std::vector<double> g{3.0, 4.0};
  auto out = clip(g, 1.0);
  EXPECT_NEAR(out[0], 0.6, 1e-15);
  EXPECT_NEAR(out[1], 0.8, 1e-15);
  EXPECT_NEAR(norm(out), 1.0, 1e-15);
}

TEST(Clip, ZeroVectorFixed) {
  const std::vector<double> g{0.0, 0.0, 0.0};
  EXPECT_EQ(clip(g, 0.5), g);
}

TEST(Clip, RejectsBadInput) {
  const std::vector<double> g{1.0, NAN};
  EXPECT_THROW(clip(g, 1.0), Error);
  const std::vector<double> h{1.0};
  EXPECT_THROW(clip(h, 0.0), Error);
}

TEST(Clip, NormBoundAndCollinearity) {
  std::mt19937_64 gen(1);
  std::normal_distribution<double> N(0.0, 5.0);
  for (int k = 0; k < 200; ++k) {
    std::vector<double> g{N(gen), N(gen), N(gen)};
    const double c = 0.1 + std::abs(N(gen));
    auto out = clip(g, c);
    EXPECT_LE(norm(out), c * (1 + 1e-15));
    if (norm(g) <= c) {
      EXPECT_EQ(out, g);
    }
    const double lambda = 0.5 + std::abs(N(gen));
    std::vector<double> lg{lambda * g[0], lambda * g[1], lambda * g[2]};
    auto lout = clip(lg, c);
    // positively collinear: cosine 1
    EXPECT_NEAR(dot(out, lout), norm(out) * norm(lout), 1e-9 * (1 + norm(out) * norm(lout)));
  }
}

TEST(Project, InteriorAndClamp) {
  auto box1 = BoxRegion::uniform(1, -10, 10);
  EXPECT_EQ(project(ParamVector{0.5}, box1), ParamVector{0.5});
  auto box2 = BoxRegion::uniform(2, -10, 10);
  EXPECT_EQ(project(ParamVector{12.0, -11.0}, box2), (ParamVector{10.0, -10.0}));
}

TEST(Project, DimensionMismatch) {
  EXPECT_THROW(project(ParamVector{1.0, 2.0}, BoxRegion::uniform(1, 0, 1)), Error);
}

TEST(Project, NonexpansiveAndIdempotent) {
  std::mt19937_64 gen(2);
  std::normal_distribution<double> N(0.0, 8.0);
  BoxRegion box({-1.0, -2.0, -3.0}, {1.0, 2.0, 3.0});
  for (int k = 0; k < 500; ++k) {
    ParamVector x{N(gen), N(gen), N(gen)}, y{N(gen), N(gen), N(gen)};
    auto px = project(x, box), py = project(y, box);
    EXPECT_LE(std::sqrt(distance_sq(px.values(), py.values())), std::sqrt(distance_sq(x.values(), y.values())) + 1e-12);
    EXPECT_EQ(project(px, box), px);
    EXPECT_TRUE(box.contains(px.values()));
  }
}

TEST(Project, UnboundedIsIdentity) {
  ParamVector x{1e9, -1e9};
  EXPECT_EQ(project(x, BoxRegion::unbounded(2)), x);
}

TEST(BoxRegionTest, RejectsInvertedBounds) {
  EXPECT_THROW(BoxRegion({1.0}, {0.0}), Error);
}

TEST(ParamVectorTest, RejectsNonFinite) {
  EXPECT_THROW(ParamVector(std::vector<double>{1.0, INFINITY}), Error);
  EXPECT_THROW(ParamVector(2, NAN), Error);
}

TEST(Schedule, Values) {
  EXPECT_NEAR(StepSchedule::polynomial(10, 100)(1), 0.09901, 1e-5);
  EXPECT_EQ(StepSchedule::constant(0.01)(999), 0.01);
  EXPECT_DOUBLE_EQ(StepSchedule::polynomial(50, 5000)(5000), 0.005);
  EXPECT_EQ(schedule_value(StepSchedule::polynomial(10, 100), 1), 10.0 / 101.0);
}

TEST(Schedule, RejectsT0AndBadParams) {
  EXPECT_THROW(StepSchedule::constant(0.1)(0), Error);
  EXPECT_THROW(StepSchedule::constant(-1.0), Error);
  EXPECT_THROW(StepSchedule::polynomial(0.0, 1.0), Error);
  EXPECT_THROW(StepSchedule::polynomial(1.0, -1.0), Error);
}

TEST(Schedule, NonIncreasing) {
  for (const auto& s : {StepSchedule::polynomial(10, 100), StepSchedule::polynomial(50, 5000),
                        StepSchedule::constant(0.3), StepSchedule::polynomial(1, 0)}) {
    for (std::uint64_t t = 1; t < 20000; ++t) ASSERT_LE(s(t + 1), s(t));
  }
}

TEST(ValidateSchedule, ConstantOneOverMu) {
  const double mu = 0.9;
  EXPECT_TRUE(validate_schedule_scvx(StepSchedule::constant(1 / mu), mu, 1000).ok);
}

TEST(ValidateSchedule, ConstantThreeOverMuFailsAtT1) {
  const double mu = 0.9;
  auto r = validate_schedule_scvx(StepSchedule::constant(3 / mu), mu, 1000);
  EXPECT_FALSE(r.ok);
  EXPECT_EQ(r.first_violation, 1u);
  EXPECT_EQ(r.condition, 2);
}

TEST(ValidateSchedule, PolynomialWithLargeA0Passes) {
  // gamma_{t-1}/gamma_t - 1 = 1/(a1+t-1) <= (mu/2) a0/(a1+t) for all t >= 2
  // iff a0 >= (2/mu) (a1+2)/(a1+1); a0 = 2/mu on the nose misses by that factor.
  for (double mu : {0.2, 0.9, 1.5}) {
    for (double a1 : {1.0, 10.0, 100.0}) {
      const double a0 = 2.0 / mu * (a1 + 2.0) / (a1 + 1.0) * (1 + 1e-12);
      auto r = validate_schedule_scvx(StepSchedule::polynomial(a0, a1), mu, 1000000);
      EXPECT_TRUE(r.ok) << r.message;
      EXPECT_FALSE(validate_schedule_scvx(StepSchedule::polynomial(2.0 / mu, a1), mu, 10).ok);
    }
  }
}

TEST(ValidateSchedule, SmallA0FailsRatio) {
  auto r = validate_schedule_scvx(StepSchedule::polynomial(0.5, 0.0), 0.9, 100);
  EXPECT_FALSE(r.ok);
  EXPECT_EQ(r.condition, 1);
}

TEST(ValidateSchedule, ExperimentSchedule) {
  EXPECT_TRUE(validate_schedule_scvx(StepSchedule::polynomial(10, 100), 0.9, 100000).ok);
}

TEST(ContractionProduct, ClosedFormMatchesDirect) {
  for (auto s : {StepSchedule::polynomial(10, 100), StepSchedule::polynomial(3, 0.5), StepSchedule::constant(0.01)}) {
    for (double kappa : {0.05, 0.3, 0.9}) {
      double direct = 1.0;
      for (std::uint64_t n = 1; n <= 5000; ++n) {
        direct *= 1.0 - kappa * s(n);
        if (n % 997 == 0 || n == 5000) {
          EXPECT_NEAR(contraction_product(s, kappa, n), direct, 1e-10 * std::max(1e-300, direct) + 1e-300)
              << s.describe() << " kappa=" << kappa << " n=" << n;
        }
      }
    }
  }
}

#include "kdisc/kqd.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

using namespace kdisc;
using kdisc::testutil::random_points;

namespace {

EmpiricalMeasure uni(const PointSet& x) { return EmpiricalMeasure::uniform(x); }

KqdConfig config(Index l, Index m, int p, std::uint64_t seed) {
  KqdConfig cfg;
  cfg.p = p;
  cfg.directions = l;
  cfg.anchors = m;
  cfg.seed = seed;
  return cfg;
}

double sample_sd(const std::vector<double>& v) {
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace

TEST(Directions, SingleAnchorNormalization) {
  const KernelSpec k = KernelSpec::gaussian(1.7, 0.8);
  ProjectionDirection u;
  u.kernel = k;
  u.anchors = PointSet::Constant(1, 2, 0.3);
  u.coeffs = Vector::Ones(1);
  u.norm = std::sqrt(eval(k, point(u.anchors, 0), point(u.anchors, 0)));
  RngStream rng(1);
  const PointSet xs = random_points(rng, 20, 2);
  for (Index i = 0; i < xs.rows(); ++i) {
    const double expected = eval(k, point(u.anchors, 0), point(xs, i)) / std::sqrt(1.7);
    EXPECT_NEAR(u.evaluate(point(xs, i)), expected, 1e-14);
  }
  EXPECT_NEAR(u.unit_norm(), 1.0, 1e-14);
}

TEST(Directions, SampledDirectionsHaveUnitNorm) {
  RngStream rng(2);
  const PointSet pooled = random_points(rng, 40, 3);
  for (std::uint64_t s = 0; s < 100; ++s) {
    const auto dirs = sample_directions(KernelSpec::matern(MaternOrder::ThreeHalves, 2.0, 0.7), config(1, 5, 2, s),
                                        pooled);
    ASSERT_EQ(dirs.size(), 1u);
    EXPECT_GT(dirs[0].norm, 0.0);
    EXPECT_NEAR(dirs[0].unit_norm(), 1.0, 1e-10);
  }
}

TEST(Directions, DeterministicUnderSeed) {
  RngStream rng(3);
  const PointSet pooled = random_points(rng, 30, 2);
  const KernelSpec k = KernelSpec::gaussian(1.0, 1.0);
  const auto a = sample_directions(k, config(4, 3, 2, 99), pooled);
  const auto b = sample_directions(k, config(4, 3, 2, 99), pooled);
  ASSERT_EQ(a.size(), 4u);
  for (std::size_t l = 0; l < a.size(); ++l) {
    EXPECT_EQ(a[l].anchors, b[l].anchors);
    EXPECT_EQ(a[l].coeffs, b[l].coeffs);
    EXPECT_EQ(a[l].norm, b[l].norm);
  }
  const auto c = sample_directions(k, config(4, 3, 2, 100), pooled);
  EXPECT_NE(a[0].coeffs, c[0].coeffs);
}

TEST(Directions, ReferenceRulesProduceUnitDirections) {
  RngStream rng(4);
  const PointSet pooled = random_points(rng, 50, 2);
  for (ReferenceRule rule : {ReferenceRule::Pooled, ReferenceRule::ScaledGaussian, ReferenceRule::ScaledUniform}) {
    KqdConfig cfg = config(3, 4, 2, 5);
    cfg.reference = rule;
    for (const auto& u : sample_directions(KernelSpec::gaussian(1.0, 1.0), cfg, pooled))
      EXPECT_NEAR(u.unit_norm(), 1.0, 1e-10);
  }
}

TEST(Directions, InvalidConfig) {
  const PointSet pooled = PointSet::Zero(3, 1);
  const KernelSpec k = KernelSpec::gaussian(1.0, 1.0);
  EXPECT_THROW(sample_directions(k, config(0, 1, 2, 0), pooled), std::invalid_argument);
  EXPECT_THROW(sample_directions(k, config(1, 0, 2, 0), pooled), std::invalid_argument);
  EXPECT_THROW(sample_directions(k, config(1, 1, 0, 0), pooled), std::invalid_argument);
  EXPECT_THROW(sample_directions(k, config(1, 1, 2, 0), PointSet(0, 1)), std::invalid_argument);
}

TEST(Directions, LogScaledCounts) {
  const KqdConfig cfg = KqdConfig::log_scaled(500, 2, 7);
  EXPECT_EQ(cfg.directions, 7);  // ceil(ln 500) = ceil(6.21)
  EXPECT_EQ(cfg.anchors, 7);
  EXPECT_EQ(KqdConfig::log_scaled(5000, 2, 0).directions, 9);
  EXPECT_EQ(KqdConfig::log_scaled(1, 2, 0).directions, 1);
}

TEST(DirectionalQuantile, Examples) {
  const std::vector<double> v{3.0, 1.0, 4.0, 2.0};
  EXPECT_EQ(directional_quantile(v, 0.5), 2.0);
  EXPECT_EQ(directional_quantile(v, 1.0), 4.0);
  EXPECT_EQ(directional_quantile(v, 0.001), 1.0);
  EXPECT_EQ(directional_quantile(v, 0.75), 3.0);
  EXPECT_EQ(directional_quantile(v, 0.76), 4.0);
}

TEST(DirectionalQuantile, Errors) {
  const std::vector<double> v{1.0};
  EXPECT_THROW(directional_quantile(std::vector<double>{}, 0.5), std::invalid_argument);
  EXPECT_THROW(directional_quantile(v, 0.0), std::invalid_argument);
  EXPECT_THROW(directional_quantile(v, 1.5), std::invalid_argument);
}

TEST(DirectionalQuantile, ThroughDirection) {
  ProjectionDirection u;
  u.kernel = KernelSpec::linear();
  u.anchors = PointSet::Ones(1, 1);
  u.coeffs = Vector::Ones(1);
  u.norm = 1.0;
  const std::vector<double> xs{0.5, -1.0, 2.0, 0.1};
  EXPECT_DOUBLE_EQ(directional_quantile(u, column(xs), 0.5), 0.1);
}

TEST(Ekqd, IdenticalSamplesGiveZero) {
  RngStream rng(5);
  const PointSet x = random_points(rng, 25, 2);
  const KernelSpec k = KernelSpec::gaussian(1.0, 1.0);
  for (int p : {1, 2, 3}) {
    EXPECT_EQ(ekqd_p(k, uni(x), uni(x), config(5, 5, p, 1)), 0.0);
    EXPECT_EQ(supkqd_p(k, uni(x), uni(x), config(5, 5, p, 1)), 0.0);
  }
}

TEST(Ekqd, SinglePointSingleDirection) {
  const KernelSpec k = KernelSpec::gaussian(1.0, 0.9);
  const PointSet x = PointSet::Constant(1, 1, 0.2);
  const PointSet y = PointSet::Constant(1, 1, -0.4);
  const auto dirs = sample_directions(k, config(1, 2, 3, 11), stack(x, y));
  const double expected = std::pow(std::abs(dirs[0].evaluate(point(x, 0)) - dirs[0].evaluate(point(y, 0))), 3);
  EXPECT_NEAR(ekqd_p(dirs, x, y, 3), expected, 1e-15);
  const auto nu = QuantileWeighting::custom([](double a) { return 2.0 + a; });
  EXPECT_NEAR(ekqd_p(dirs, x, y, 3, nu), 3.0 * expected, 1e-15);
}

TEST(Ekqd, LinearKernelIsSortedL1) {
  RngStream rng(6);
  const PointSet x = random_points(rng, 40, 1);
  const PointSet y = random_points(rng, 40, 1, -1.0, 3.0);
  std::vector<double> xs(x.data(), x.data() + 40), ys(y.data(), y.data() + 40);
  std::sort(xs.begin(), xs.end());
  std::sort(ys.begin(), ys.end());
  double oracle = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) oracle += std::abs(xs[i] - ys[i]);
  oracle /= 40.0;
  // Any single-anchor direction of the linear kernel is u(x) = +-x.
  const auto dirs = sample_directions(KernelSpec::linear(), config(1, 1, 1, 3), stack(x, y));
  EXPECT_NEAR(std::abs(dirs[0].evaluate(PointView(std::vector<double>{1.0}))), 1.0, 1e-12);
  EXPECT_NEAR(ekqd_p(dirs, x, y, 1), oracle, 1e-12);
}

TEST(Ekqd, WeightingEvaluatedAtRankOverN) {
  const PointSet x = column(std::vector<double>{0.0, 1.0, 2.0});
  const PointSet y = column(std::vector<double>{1.0, 1.0, 4.0});
  ProjectionDirection u;
  u.kernel = KernelSpec::linear();
  u.anchors = PointSet::Ones(1, 1);
  u.coeffs = Vector::Ones(1);
  u.norm = 1.0;
  const auto nu = QuantileWeighting::custom([](double a) { return a; });
  // |0-1| (1/3) + |1-1| (2/3) + |2-4| (3/3), divided by N = 3.
  EXPECT_NEAR(ekqd_p({u}, x, y, 1, nu), (1.0 / 3.0 + 2.0) / 3.0, 1e-15);
}

TEST(Ekqd, SupDominatesMeanAndCoincidesForOneDirection) {
  RngStream rng(7);
  const KernelSpec k = KernelSpec::matern(MaternOrder::FiveHalves, 1.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const PointSet x = random_points(rng, 30, 2);
    const PointSet y = random_points(rng, 30, 2, -1.5, 2.5);
    const auto dirs = sample_directions(k, config(6, 4, 2, static_cast<std::uint64_t>(trial)), stack(x, y));
    EXPECT_GE(supkqd_p(dirs, x, y, 2), ekqd_p(dirs, x, y, 2));
    const std::vector<ProjectionDirection> one{dirs[0]};
    EXPECT_EQ(supkqd_p(one, x, y, 2), ekqd_p(one, x, y, 2));
  }
}

TEST(Ekqd, SymmetricWithSharedDirections) {
  RngStream rng(8);
  const PointSet x = random_points(rng, 35, 2);
  const PointSet y = random_points(rng, 35, 2, -1.0, 3.0);
  const auto dirs = sample_directions(KernelSpec::gaussian(1.0, 1.0), config(5, 5, 2, 2), stack(x, y));
  for (int p : {1, 2, 3}) {
    EXPECT_EQ(ekqd_p(dirs, x, y, p), ekqd_p(dirs, y, x, p));
    EXPECT_EQ(supkqd_p(dirs, x, y, p), supkqd_p(dirs, y, x, p));
  }
}

TEST(Ekqd, TriangleInequalityForPOne) {
  RngStream rng(9);
  const KernelSpec k = KernelSpec::gaussian(1.0, 0.8);
  for (int trial = 0; trial < 50; ++trial) {
    const PointSet p = random_points(rng, 20, 2);
    const PointSet q = random_points(rng, 20, 2, -1.0, 2.5);
    const PointSet r = random_points(rng, 20, 2, -3.0, 1.0);
    const auto dirs = sample_directions(k, config(4, 3, 1, static_cast<std::uint64_t>(trial)), stack(p, q));
    EXPECT_LE(ekqd_p(dirs, p, r, 1), ekqd_p(dirs, p, q, 1) + ekqd_p(dirs, q, r, 1) + 1e-10);
  }
}

TEST(Ekqd, SpreadShrinksWithMoreDirections) {
  RngStream rng(10);
  const PointSet x = random_points(rng, 100, 1);
  const PointSet y = random_points(rng, 100, 1, -1.0, 3.0);
  const KernelSpec k = KernelSpec::gaussian(1.0, 1.0);
  std::vector<double> few, many;
  for (std::uint64_t s = 0; s < 50; ++s) {
    few.push_back(ekqd_p(k, uni(x), uni(y), config(8, 5, 2, s)));
    many.push_back(ekqd_p(k, uni(x), uni(y), config(64, 5, 2, 1000 + s)));
  }
  EXPECT_LE(sample_sd(many), 0.5 * sample_sd(few));
}

TEST(Ekqd, AmplitudeScalesByTauToThePowerP) {
  // u = f / ||f|| carries the factor tau, so the p-th power picks up tau^p.
  RngStream rng(11);
  const PointSet x = random_points(rng, 30, 2);
  const PointSet y = random_points(rng, 30, 2, -1.0, 2.5);
  const KernelSpec k1 = KernelSpec::gaussian(1.0, 0.9);
  const KernelSpec k4 = KernelSpec::gaussian(4.0, 0.9);
  for (int p : {1, 2, 3}) {
    const double base = ekqd_p(k1, uni(x), uni(y), config(5, 5, p, 3));
    const double scaled = ekqd_p(k4, uni(x), uni(y), config(5, 5, p, 3));
    EXPECT_NEAR(scaled, std::pow(2.0, p) * base, 1e-10 * scaled);
    EXPECT_NEAR(kqd_root(scaled, p), 2.0 * kqd_root(base, p), 1e-10);
  }
}

TEST(Ekqd, UnequalSizesThrow) {
  const KernelSpec k = KernelSpec::gaussian(1.0, 1.0);
  const PointSet x = PointSet::Zero(4, 1), y = PointSet::Ones(5, 1);
  EXPECT_THROW(ekqd_p(k, uni(x), uni(y), config(2, 2, 2, 0)), ShapeError);
  EXPECT_THROW(supkqd_p(k, uni(x), uni(y), config(2, 2, 2, 0)), ShapeError);
  EXPECT_THROW(ekqd_centered(k, uni(x), uni(y), config(2, 2, 2, 0)), ShapeError);
}

TEST(Centered, Decomposition) {
  RngStream rng(12);
  const PointSet x = random_points(rng, 30, 2);
  const PointSet y = random_points(rng, 30, 2, -1.0, 2.5);
  const KernelSpec k = KernelSpec::gaussian(1.0, 1.0);
  const auto dirs = sample_directions(k, config(5, 4, 2, 4), stack(x, y));
  double gap = 0.0;
  for (const auto& u : dirs) {
    const double d = u.evaluate(x).mean() - u.evaluate(y).mean();
    gap += d * d;
  }
  const double expected = ekqd_p(dirs, x, y, 2) + mmd2_u(k, uni(x), uni(y)) - gap / 5.0;
  EXPECT_NEAR(ekqd_centered(k, dirs, x, y), expected, 1e-12);
  EXPECT_NEAR(ekqd_centered(k, uni(x), uni(y), config(5, 4, 2, 4)), expected, 1e-12);
}

TEST(Centered, IdenticalSamplesLeaveOnlyTheMmdTerm) {
  RngStream rng(13);
  const PointSet x = random_points(rng, 20, 1);
  const KernelSpec k = KernelSpec::gaussian(1.0, 1.0);
  const double value = ekqd_centered(k, uni(x), uni(x), config(3, 3, 2, 0));
  EXPECT_NEAR(value, mmd2_u(k, uni(x), uni(x)), 1e-12);
}

TEST(Centered, RequiresPTwo) {
  const PointSet x = PointSet::Zero(3, 1);
  EXPECT_THROW(ekqd_centered(KernelSpec::gaussian(1.0, 1.0), uni(x), uni(x), config(1, 1, 1, 0)),
               std::invalid_argument);
}

TEST(KqdRoot, InvertsPower) {
  EXPECT_DOUBLE_EQ(kqd_root(8.0, 3), 2.0);
  EXPECT_DOUBLE_EQ(kqd_root(9.0, 2), 3.0);
  EXPECT_THROW(kqd_root(1.0, 0), std::invalid_argument);
}

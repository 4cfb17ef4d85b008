#include "kdisc/calibration.hpp"
#include "kdisc/gp.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include <cmath>
#include <numbers>

using namespace kdisc;

namespace {

PointSet pts(std::initializer_list<double> v) { return column(std::vector<double>(v)); }


}  // namespace

TEST(Gp, SinglePointMean) {
  const KernelSpec k = KernelSpec::gaussian(2.0, 0.8);
  const auto post = GpPosterior::fit(k, Dataset::noise_free(pts({0.3}), Vector::Constant(1, 1.7)));
  for (double x : {-1.0, 0.0, 0.3, 1.2}) {
    const double expected = eval(k, std::span<const double>(&x, 1), point(pts({0.3}), 0)) * 1.7 / 2.0;
    EXPECT_NEAR(post.predict_mean(std::span<const double>(&x, 1)), expected, 1e-14);
  }
  const double x1 = 0.3;
  EXPECT_NEAR(post.predict_var(std::span<const double>(&x1, 1)), 0.0, 1e-14);
}

TEST(Gp, BrownianAlpha) {
  Vector y(2);
  y << 1.0, 4.0;
  const auto post = GpPosterior::fit(KernelSpec::brownian(), Dataset::noise_free(pts({1.0, 2.0}), y));
  EXPECT_NEAR(post.alpha()(0), -2.0, 1e-12);
  EXPECT_NEAR(post.alpha()(1), 3.0, 1e-12);
  const double x = 1.5;
  EXPECT_NEAR(post.predict_mean(std::span<const double>(&x, 1)), 2.5, 1e-12);
  EXPECT_NEAR(post.predict_var(std::span<const double>(&x, 1)), 0.5 * 0.5 / 1.0, 1e-12);
}

TEST(Gp, InterpolatesTrainingTargets) {
  RngStream rng(1, "interp");
  const PointSet x = testutil::random_points(rng, 20, 2);
  const Vector y = testutil::random_vector(rng, 20);
  const auto post = GpPosterior::fit(KernelSpec::matern(MaternOrder::FiveHalves, 1.0, 0.7), Dataset::noise_free(x, y));
  EXPECT_LE((post.predict_mean(x) - y).cwiseAbs().maxCoeff(), 1e-8);
  for (Index i = 0; i < x.rows(); ++i) EXPECT_LE(post.predict_var(point(x, i)), 1e-8);
  const Matrix l = post.lower();
  Matrix expected = gram(post.spec(), x);
  expected.diagonal().array() += post.jitter();
  EXPECT_LE((l * l.transpose() - expected).norm() / expected.norm(), 1e-10);
}

TEST(Gp, ZeroCorrelationGivesPrior) {
  const KernelSpec k = KernelSpec::brownian();
  Vector y(2);
  y << 0.5, -0.25;
  const auto post = GpPosterior::fit(k, Dataset::noise_free(pts({1.0, 2.0}), y));
  const double x = 0.0, z = 3.0;
  EXPECT_EQ(post.predict_mean(std::span<const double>(&x, 1)), 0.0);
  EXPECT_EQ(post.predict_cov(std::span<const double>(&x, 1), std::span<const double>(&z, 1)), 0.0);
}

TEST(Gp, LogMarginalLikelihoodExamples) {
  const KernelSpec k = KernelSpec::gaussian(1.0, 1.0);
  const double c = std::log(2 * std::numbers::pi);
  EXPECT_NEAR(log_marginal_likelihood(k, Dataset::noise_free(pts({0.0}), Vector::Zero(1))), -0.5 * c, 1e-15);
  EXPECT_NEAR(log_marginal_likelihood(k, Dataset::noise_free(pts({0.0}), Vector::Ones(1))), -0.5 * (1 + c), 1e-15);
}

TEST(Gp, LogMarginalLikelihoodDenseOracle) {
  RngStream rng(2, "lml");
  const PointSet x = testutil::random_points(rng, 3, 2);
  const Vector y = testutil::random_vector(rng, 3);
  const Vector noise = Vector::Constant(3, 0.1);
  const KernelSpec k = KernelSpec::matern(MaternOrder::ThreeHalves, 1.3, 0.9);
  Matrix a = gram(k, x);
  a.diagonal() += noise;
  const double expected = -0.5 * (y.dot(a.inverse() * y) + std::log(a.determinant()) + 3 * std::log(2 * std::numbers::pi));
  EXPECT_NEAR(log_marginal_likelihood(k, Dataset::with_noise(x, y, noise)), expected, 1e-10);
}

TEST(Gp, MeanIsLinearInTargets) {
  RngStream rng(3, "linear");
  const PointSet x = testutil::random_points(rng, 15, 1);
  const Vector y1 = testutil::random_vector(rng, 15), y2 = testutil::random_vector(rng, 15);
  const PointSet q = testutil::random_points(rng, 30, 1);
  const KernelSpec k = KernelSpec::gaussian(1.0, 0.5);
  const Vector noise = Vector::Constant(15, 0.01);
  const auto a = GpPosterior::fit(k, Dataset::with_noise(x, y1, noise));
  const auto b = GpPosterior::fit(k, Dataset::with_noise(x, y2, noise));
  const auto ab = GpPosterior::fit(k, Dataset::with_noise(x, y1 + y2, noise));
  EXPECT_LE((ab.predict_mean(q) - a.predict_mean(q) - b.predict_mean(q)).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Gp, AmplitudeInvariance) {
  RngStream rng(4, "amp");
  const PointSet x = testutil::random_points(rng, 12, 2);
  const Vector y = testutil::random_vector(rng, 12);
  const PointSet q = testutil::random_points(rng, 10, 2);
  const KernelSpec k1 = KernelSpec::matern(MaternOrder::FiveHalves, 1.0, 1.0);
  const KernelSpec k5 = k1.with_amplitude(5.0);
  const auto p1 = GpPosterior::fit(k1, Dataset::noise_free(x, y), JitterPolicy::none());
  const auto p5 = GpPosterior::fit(k5, Dataset::noise_free(x, y), JitterPolicy::none());
  EXPECT_LE((p1.predict_mean(q) - p5.predict_mean(q)).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LE((5.0 * p1.predict_cov(q) - p5.predict_cov(q)).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Gp, PosteriorCovarianceIsPsd) {
  RngStream rng(5, "psd");
  const PointSet x = testutil::random_points(rng, 10, 1);
  const auto post = GpPosterior::fit(KernelSpec::gaussian(1.0, 0.6), Dataset::noise_free(x, testutil::random_vector(rng, 10)));
  const Matrix c = post.predict_cov(testutil::random_points(rng, 40, 1));
  EXPECT_GE(Eigen::SelfAdjointEigenSolver<Matrix>(c).eigenvalues().minCoeff(), -1e-8 * std::max(c.trace(), 1.0));
}

TEST(Gp, BrownianClosedFormsAgree) {
  RngStream rng(6, "bm_closed");
  for (int rep = 0; rep < 20; ++rep) {
    const Index n = 2 + static_cast<Index>(rng.below(49));
    const Partition part(2.0, testutil::random_partition(rng, n, 2.0));
    const Vector f = testutil::random_vector(rng, n);
    const auto post = GpPosterior::fit(KernelSpec::brownian(), Dataset::noise_free(part.as_points(), f), JitterPolicy::none());
    for (int q = 0; q < 20; ++q) {
      const double x = 2.0 * rng.uniform(), y = 2.0 * rng.uniform();
      const std::span<const double> xs(&x, 1), ys(&y, 1);
      EXPECT_NEAR(post.predict_mean(xs), bm_posterior_mean(part, f, x), 1e-8);
      EXPECT_NEAR(post.predict_cov(xs, ys), bm_posterior_cov(part, x, y), 1e-8);
    }
  }
}

TEST(Gp, JitterEscalationAndFailure) {
  PointSet dup(3, 1);
  dup << 0.5, 0.5, 0.5;
  const Vector y = Vector::Ones(3);
  const auto post = GpPosterior::fit(KernelSpec::gaussian(1.0, 1.0), Dataset::noise_free(dup, y));
  EXPECT_GT(post.jitter(), 0.0);
  try {
    GpPosterior::fit(KernelSpec::gaussian(1.0, 1.0), Dataset::noise_free(dup, y), JitterPolicy::none());
    FAIL() << "expected SingularMatrixError";
  } catch (const SingularMatrixError& e) {
    EXPECT_GT(e.condition_estimate(), 1e10);
  }
}

TEST(Gp, VarianceClamp) {
  EXPECT_EQ(clamp_variance(-1e-12, 1.0), 0.0);
  EXPECT_EQ(clamp_variance(0.25, 1.0), 0.25);
  EXPECT_THROW(clamp_variance(-1e-6, 1.0), std::exception);
}

TEST(Gp, DatasetValidation) {
  EXPECT_THROW(Dataset::noise_free(pts({1.0, 2.0}), Vector::Ones(3)), ShapeError);
  EXPECT_THROW(Dataset::with_noise(pts({1.0}), Vector::Ones(1), Vector::Constant(1, -1.0)), std::invalid_argument);
}

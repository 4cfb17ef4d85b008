#include "kdisc/bq.hpp"
#include "kdisc/calibration.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <Eigen/Cholesky>

#include <cmath>

using namespace kdisc;

namespace {

double at(const Embedding& e, double x) { return e.eval(std::span<const double>(&x, 1)); }

PointSet gaussian_draws(RngStream& rng, const GaussianMeasure& m, Index n) {
  const Matrix l = Eigen::LLT<Matrix>(m.cov).matrixL();
  PointSet out(n, m.mean.size());
  for (Index i = 0; i < n; ++i) out.row(i) = (m.mean + l * testutil::random_vector(rng, m.mean.size())).transpose();
  return out;
}

double quadratic_form(const Embedding& emb, const PointSet& nodes, const Vector& w) {
  return emb.initial_error() - 2 * w.dot(emb.eval(nodes)) + w.dot(gram(emb.kernel(), nodes) * w);
}

GaussianMeasure std_normal(Index d) { return {Vector::Zero(d), Matrix::Identity(d, d)}; }

}  // namespace

TEST(Bq, BrownianEmbedding) {
  const Embedding e(KernelSpec::brownian(), LebesgueInterval{1.0});
  EXPECT_NEAR(at(e, 1.0), 0.5, 1e-15);
  EXPECT_NEAR(e.initial_error(), 1.0 / 3.0, 1e-15);
  const Embedding e2(KernelSpec::brownian(2.0), LebesgueInterval{3.0});
  EXPECT_NEAR(at(e2, 1.2), 2.0 * (3.0 * 1.2 - 1.2 * 1.2 / 2), 1e-14);
  EXPECT_NEAR(e2.initial_error(), 2.0 * 27.0 / 3.0, 1e-13);
}

TEST(Bq, GaussianEmbeddingExamples) {
  const Embedding e(KernelSpec::gaussian(1.0, 1.0), std_normal(1));
  EXPECT_NEAR(at(e, 0.0), 1.0 / std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(e.initial_error(), 1.0 / std::sqrt(3.0), 1e-15);
}

TEST(Bq, GaussianEmbeddingMonteCarlo) {
  RngStream rng(1, "kme_mc");
  GaussianMeasure m{Vector(2), Matrix(2, 2)};
  m.mean << 0.3, -0.5;
  m.cov << 1.2, 0.3, 0.3, 0.6;
  const KernelSpec k = KernelSpec::gaussian(1.5, 0.9);
  const Embedding e(k, m);
  const PointSet draws = gaussian_draws(rng, m, 200000);
  const std::vector<double> x{0.1, 0.2};
  EXPECT_NEAR(e.eval(x) / monte_carlo_kme(k, draws, x), 1.0, 0.01);
  const PointSet few = draws.topRows(3000);
  EXPECT_NEAR(e.initial_error() / monte_carlo_initial_error(k, few), 1.0, 0.02);
}

TEST(Bq, UniformBoxEmbeddingMonteCarlo) {
  RngStream rng(2, "box_mc");
  UniformBox box{Vector(2), Vector(2)};
  box.lo << -1.0, 0.0;
  box.hi << 0.5, 2.0;
  const KernelSpec k = KernelSpec::gaussian(1.0, 0.7);
  const Embedding e(k, box);
  PointSet draws(200000, 2);
  for (Index i = 0; i < draws.rows(); ++i)
    for (Index j = 0; j < 2; ++j) draws(i, j) = box.lo(j) + (box.hi(j) - box.lo(j)) * rng.uniform();
  const std::vector<double> x{0.2, 1.9};
  EXPECT_NEAR(e.eval(x) / monte_carlo_kme(k, draws, x), 1.0, 0.01);
  EXPECT_NEAR(e.initial_error() / monte_carlo_initial_error(k, draws.topRows(3000)), 1.0, 0.02);
}

TEST(Bq, UnsupportedPairsThrow) {
  EXPECT_THROW(Embedding(KernelSpec::matern(MaternOrder::Half, 1.0, 1.0), std_normal(1)), UnsupportedEmbeddingError);
  EXPECT_THROW(Embedding(KernelSpec::brownian(), std_normal(1)), UnsupportedEmbeddingError);
  EXPECT_THROW(Embedding(KernelSpec::gaussian(1.0, 1.0), LebesgueInterval{1.0}), UnsupportedEmbeddingError);
}

TEST(Bq, SingleNode) {
  const KernelSpec k = KernelSpec::gaussian(2.0, 1.0);
  const Embedding e(k, std_normal(1));
  const PointSet x = column(std::vector<double>{0.4});
  const BqResult r = bq_posterior(e, x, Vector::Constant(1, 3.0));
  EXPECT_NEAR(r.mean, e.eval(point(x, 0)) * 3.0 / 2.0, 1e-14);
}

TEST(Bq, QuadratureIdentities) {
  RngStream rng(3, "bq_ident");
  const KernelSpec k = KernelSpec::gaussian(1.3, 0.8);
  GaussianMeasure m{Vector::Constant(2, 0.2), Matrix::Identity(2, 2) * 0.7};
  const Embedding e(k, m);
  const PointSet x = testutil::random_points(rng, 15, 2);
  const Vector f = testutil::random_vector(rng, 15);
  const BqResult r = bq_posterior(e, x, f);
  EXPECT_NEAR(r.mean, r.rule.weights.dot(f), 1e-12);
  EXPECT_NEAR(r.mean, r.rule.apply(f), 1e-12);
  EXPECT_NEAR(r.variance, quadratic_form(e, x, r.rule.weights), 1e-10);
}

TEST(Bq, BrownianUniformGridVariance) {
  for (double T : {1.0, 2.5})
    for (Index n : {1, 4, 10, 50}) {
      const Embedding e(KernelSpec::brownian(), LebesgueInterval{T});
      const Partition part = Partition::uniform(T, n);
      const BqResult r = bq_posterior(e, part.as_points(), Vector::Zero(n), 0.0, JitterPolicy::none());
      const double expected = T * T * T / (12.0 * static_cast<double>(n * n));
      EXPECT_NEAR(r.variance, expected, 1e-10) << "T=" << T << " n=" << n;
      EXPECT_NEAR(bm_bq_variance(part), expected, 1e-12);
    }
}

TEST(Bq, AmplitudeScaling) {
  RngStream rng(4, "bq_amp");
  const KernelSpec k = KernelSpec::gaussian(1.0, 0.6);
  PointSet x(8, 1);
  for (Index i = 0; i < 8; ++i) x(i, 0) = -2.0 + 4.0 * (static_cast<double>(i) + 0.3 * rng.uniform()) / 8.0;
  const Vector f = testutil::random_vector(rng, 8);
  const Embedding e1(k, std_normal(1));
  const Embedding e7 = e1.with_kernel(k.with_amplitude(7.0));
  const BqResult r1 = bq_posterior(e1, x, f, 0.0, JitterPolicy::none());
  const BqResult r7 = bq_posterior(e7, x, f, 0.0, JitterPolicy::none());
  EXPECT_NEAR(r1.mean, r7.mean, 1e-10);
  EXPECT_NEAR(7.0 * r1.variance, r7.variance, 1e-10);
}

TEST(Bq, AddingNodesNeverIncreasesVariance) {
  RngStream rng(5, "bq_mono");
  const Embedding e(KernelSpec::gaussian(1.0, 1.0), std_normal(1));
  const PointSet x = testutil::random_points(rng, 12, 1);
  double prev = e.initial_error();
  for (Index n = 1; n <= 12; ++n) {
    const double v = bq_posterior(e, x.topRows(n), Vector::Zero(n)).variance;
    EXPECT_LE(v, prev + 1e-10);
    prev = v;
  }
}

TEST(Bq, OwWeightsSingleNodeAndStationarity) {
  const KernelSpec c = KernelSpec::gaussian(1.0, 1.0);
  const Embedding e(c, std_normal(1));
  const PointSet u1 = column(std::vector<double>{0.7});
  EXPECT_NEAR(ow_weights(e, u1)(0), e.eval(point(u1, 0)) / 1.0, 1e-14);

  RngStream rng(6, "ow_grad");
  const PointSet u = testutil::random_points(rng, 6, 1);
  const Vector w = ow_weights(e, u);
  const Vector grad = 2.0 * (gram(c, u) * w - e.eval(u));
  EXPECT_LE(grad.norm(), 1e-8);
}

TEST(Bq, OwWeightsAreOptimal) {
  RngStream rng(7, "ow_opt");
  const KernelSpec c = KernelSpec::gaussian(1.0, 0.8);
  const Embedding e(c, std_normal(2));
  for (int trial = 0; trial < 20; ++trial) {
    const Index n = 1 + static_cast<Index>(rng.below(10));
    const PointSet u = testutil::random_points(rng, n, 2);
    const Vector w = ow_weights(e, u);
    const double best = weighted_embedding_mmd2(e, u, w);
    EXPECT_NEAR(best, quadratic_form(e, u, w), 1e-12);
    EXPECT_LE(best, weighted_embedding_mmd2(e, u, Vector::Constant(n, 1.0 / static_cast<double>(n))) + 1e-10);
    for (int r = 0; r < 200; ++r) {
      const Vector v = w + 0.3 * testutil::random_vector(rng, n);
      EXPECT_LE(best, weighted_embedding_mmd2(e, u, v) + 1e-10);
    }
  }
}

TEST(Bq, OwSingularGramSuggestsJitter) {
  const Embedding e(KernelSpec::gaussian(1.0, 1.0), std_normal(1));
  const PointSet u = column(std::vector<double>{0.5, 0.5});
  try {
    ow_weights(e, u);
    FAIL() << "expected SingularMatrixError";
  } catch (const SingularMatrixError& err) {
    EXPECT_NE(std::string(err.what()).find("jitter"), std::string::npos);
  }
}

TEST(Bq, OwMmdIdentityGenerator) {
  RngStream rng(8, "ow_id");
  const KernelSpec k = KernelSpec::gaussian(1.0, 1.0);
  const Embedding e(k, std_normal(1));
  const PointSet u = testutil::random_points(rng, 5, 1);
  const PointSet y = testutil::random_points(rng, 40, 1);
  const Generator id = [](PointView p) { return Vector::Map(p.data(), static_cast<Index>(p.size())).eval(); };
  const Vector w = ow_weights(e, u);
  const double expected = mmd2_weighted(k, EmpiricalMeasure::weighted(u, w), EmpiricalMeasure::uniform(y));
  EXPECT_NEAR(ow_mmd2(k, e, id, u, EmpiricalMeasure::uniform(y)), expected, 1e-12);
  const PointSet pushed = apply_generator(id, u);
  EXPECT_TRUE((pushed.array() == u.array()).all());
}

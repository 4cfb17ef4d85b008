#include "kdisc/bq.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace kdisc {

namespace {

// Integral of exp(-(x - t)^2 / (2 l^2)) over t in [a, b].
double gauss_segment(double x, double a, double b, double l) {
  const double s = std::sqrt(2.0) * l;
  return l * std::sqrt(std::numbers::pi / 2.0) * (std::erf((b - x) / s) - std::erf((a - x) / s));
}

// Double integral of exp(-(s - t)^2 / (2 l^2)) over [0, D]^2.
double gauss_square(double d, double l) {
  const double root = l * std::sqrt(std::numbers::pi / 2.0) * d * std::erf(d / (std::sqrt(2.0) * l));
  return 2.0 * (root - l * l * (1.0 - std::exp(-d * d / (2.0 * l * l))));
}

}  // namespace

Embedding::Embedding(KernelSpec kernel, Measure measure) : kernel_(kernel), measure_(std::move(measure)) {
  kernel_.validate();
  if (auto* g = std::get_if<GaussianMeasure>(&measure_)) {
    if (kernel_.family != KernelFamily::Gaussian)
      throw UnsupportedEmbeddingError("embedding: Gaussian measure requires the Gaussian kernel");
    const Index d = g->mean.size();
    if (g->cov.rows() != d || g->cov.cols() != d) throw ShapeError("embedding: covariance shape mismatch");
    if ((g->cov - g->cov.transpose()).norm() > 1e-12 * (1.0 + g->cov.norm()))
      throw std::invalid_argument("embedding: covariance must be symmetric");
    const double l2 = kernel_.lengthscale * kernel_.lengthscale;
    const Matrix shifted = g->cov + l2 * Matrix::Identity(d, d);
    Eigen::LLT<Matrix> llt(shifted);
    if (llt.info() != Eigen::Success) throw std::invalid_argument("embedding: covariance must be PSD");
    shifted_inv_ = llt.solve(Matrix::Identity(d, d));
    const Matrix scaled = Matrix::Identity(d, d) + g->cov / l2;
    scale_ = kernel_.tau2 / std::sqrt(scaled.determinant());
  } else if (auto* b = std::get_if<UniformBox>(&measure_)) {
    if (kernel_.family != KernelFamily::Gaussian)
      throw UnsupportedEmbeddingError("embedding: uniform box measure requires the Gaussian kernel");
    if (b->lo.size() != b->hi.size() || b->lo.size() < 1) throw ShapeError("embedding: box bounds shape mismatch");
    if (!(b->lo.array() < b->hi.array()).all()) throw std::invalid_argument("embedding: box requires lo < hi");
  } else {
    const auto& li = std::get<LebesgueInterval>(measure_);
    if (kernel_.family != KernelFamily::Brownian)
      throw UnsupportedEmbeddingError("embedding: Lebesgue interval measure requires the Brownian kernel");
    if (!(li.T > 0.0)) throw std::invalid_argument("embedding: interval length must be positive");
  }
}

Index Embedding::dim() const noexcept {
  if (auto* g = std::get_if<GaussianMeasure>(&measure_)) return g->mean.size();
  if (auto* b = std::get_if<UniformBox>(&measure_)) return b->lo.size();
  return 1;
}

double Embedding::eval(PointView x) const {
  if (static_cast<Index>(x.size()) != dim()) throw ShapeError("kme_eval: dimension mismatch");
  if (auto* g = std::get_if<GaussianMeasure>(&measure_)) {
    Eigen::Map<const Vector> xv(x.data(), static_cast<Index>(x.size()));
    const Vector r = xv - g->mean;
    return scale_ * std::exp(-0.5 * r.dot(shifted_inv_ * r));
  }
  if (auto* b = std::get_if<UniformBox>(&measure_)) {
    double out = kernel_.tau2;
    for (Index j = 0; j < b->lo.size(); ++j)
      out *= gauss_segment(x[static_cast<std::size_t>(j)], b->lo(j), b->hi(j), kernel_.lengthscale) / (b->hi(j) - b->lo(j));
    return out;
  }
  const double t = std::get<LebesgueInterval>(measure_).T;
  const double v = x[0];
  if (v < 0.0 || v > t) throw DomainError("kme_eval: point outside [0, T]");
  return kernel_.tau2 * (t * v - 0.5 * v * v);
}

Vector Embedding::eval(const PointSet& xs) const {
  Vector out(xs.rows());
  for (Index i = 0; i < xs.rows(); ++i) out(i) = eval(point(xs, i));
  return out;
}

double Embedding::initial_error() const {
  if (auto* g = std::get_if<GaussianMeasure>(&measure_)) {
    const Index d = g->mean.size();
    const double l2 = kernel_.lengthscale * kernel_.lengthscale;
    const Matrix m = Matrix::Identity(d, d) + 2.0 * g->cov / l2;
    return kernel_.tau2 / std::sqrt(m.determinant());
  }
  if (auto* b = std::get_if<UniformBox>(&measure_)) {
    double out = kernel_.tau2;
    for (Index j = 0; j < b->lo.size(); ++j) {
      const double width = b->hi(j) - b->lo(j);
      out *= gauss_square(width, kernel_.lengthscale) / (width * width);
    }
    return out;
  }
  const double t = std::get<LebesgueInterval>(measure_).T;
  return kernel_.tau2 * t * t * t / 3.0;
}

double monte_carlo_kme(const KernelSpec& kernel, const PointSet& draws, PointView x) {
  if (draws.rows() < 1) throw std::invalid_argument("monte_carlo_kme: no draws");
  return kernel_row(kernel, x, draws).mean();
}

double monte_carlo_initial_error(const KernelSpec& kernel, const PointSet& draws) {
  const double n = static_cast<double>(draws.rows());
  if (draws.rows() < 2) throw std::invalid_argument("monte_carlo_initial_error: need two draws");
  return kernel_sum_self(kernel, draws, false) / (n * (n - 1.0));
}

double QuadratureRule::apply(const Vector& fvals) const {
  if (fvals.size() != weights.size()) throw ShapeError("quadrature: value count differs from weight count");
  return weights.dot(fvals);
}

BqResult bq_posterior(const Embedding& emb, const PointSet& nodes, const Vector& fvals, double lambda,
                      const JitterPolicy& policy) {
  if (nodes.rows() < 1) throw ShapeError("bq_posterior: no nodes");
  if (fvals.size() != nodes.rows()) throw ShapeError("bq_posterior: value count differs from node count");
  if (!(lambda >= 0.0)) throw std::invalid_argument("bq_posterior: lambda must be >= 0");
  Matrix k = gram(emb.kernel(), nodes);
  k.diagonal().array() += lambda;
  const Factorization fact = factorize(k, policy, "bq_posterior");
  const Vector mu = emb.eval(nodes);
  BqResult out;
  out.rule.nodes = nodes;
  out.rule.weights = fact.llt.solve(mu);
  out.mean = out.rule.weights.dot(fvals);
  const double initial = emb.initial_error();
  out.variance = clamp_variance(initial - mu.dot(out.rule.weights), initial, "bq_posterior");
  out.jitter = fact.jitter;
  return out;
}

Vector ow_weights(const Embedding& emb_c, const PointSet& base_nodes, const JitterPolicy& policy) {
  if (base_nodes.rows() < 1) throw ShapeError("ow_weights: no nodes");
  const Matrix c = gram(emb_c.kernel(), base_nodes);
  Factorization fact;
  try {
    fact = factorize(c, policy, "ow_weights");
  } catch (const SingularMatrixError& e) {
    throw SingularMatrixError(std::string(e.what()) + "; add jitter or remove duplicate nodes",
                              e.condition_estimate());
  }
  return fact.llt.solve(emb_c.eval(base_nodes));
}

double weighted_embedding_mmd2(const Embedding& emb_c, const PointSet& base_nodes, const Vector& weights) {
  const Matrix c = gram(emb_c.kernel(), base_nodes);
  const Vector mu = emb_c.eval(base_nodes);
  return emb_c.initial_error() - 2.0 * weights.dot(mu) + weights.dot(c * weights);
}

PointSet apply_generator(const Generator& generator, const PointSet& base_nodes) {
  PointSet out;
  for (Index i = 0; i < base_nodes.rows(); ++i) {
    const Vector x = generator(point(base_nodes, i));
    if (i == 0) out.resize(base_nodes.rows(), x.size());
    if (x.size() != out.cols()) throw ShapeError("generator: output dimension changed between nodes");
    out.row(i) = x.transpose();
  }
  return out;
}

double ow_mmd2(const KernelSpec& kernel_k, const Embedding& emb_c, const Generator& generator,
               const PointSet& base_nodes, const EmpiricalMeasure& q, const JitterPolicy& policy) {
  const double m = static_cast<double>(q.size());
  return ow_mmd2(kernel_k, emb_c, generator, base_nodes, q, kernel_sum_self(kernel_k, q.points, true) / (m * m),
                 policy);
}

double ow_mmd2(const KernelSpec& kernel_k, const Embedding& emb_c, const Generator& generator,
               const PointSet& base_nodes, const EmpiricalMeasure& q, double qq_mean, const JitterPolicy& policy) {
  PointSet x = apply_generator(generator, base_nodes);
  Vector w = ow_weights(emb_c, base_nodes, policy);
  return mmd2_weighted(kernel_k, EmpiricalMeasure::weighted(std::move(x), std::move(w)), q, qq_mean);
}

}  // namespace kdisc

#include "kdisc/gp.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace kdisc {

Dataset Dataset::noise_free(PointSet inputs, Vector targets) {
  Dataset d;
  d.noise = Vector::Zero(inputs.rows());
  d.inputs = std::move(inputs);
  d.targets = std::move(targets);
  d.validate();
  return d;
}

Dataset Dataset::with_noise(PointSet inputs, Vector targets, Vector noise) {
  Dataset d{std::move(inputs), std::move(targets), std::move(noise)};
  d.validate();
  return d;
}

void Dataset::validate() const {
  if (inputs.rows() < 1) throw ShapeError("dataset: need at least one point");
  if (targets.size() != inputs.rows() || noise.size() != inputs.rows())
    throw ShapeError("dataset: inputs, targets and noise lengths differ");
  if ((noise.array() < 0.0).any() || !noise.allFinite()) throw std::invalid_argument("dataset: noise must be >= 0");
}

Factorization factorize(const Matrix& a, const JitterPolicy& policy, const std::string& context) {
  const double scale = a.diagonal().mean();
  Factorization out;
  double rcond = 0.0;
  for (double level : policy.relative_levels) {
    const double jitter = level * std::abs(scale);
    Matrix shifted = a;
    shifted.diagonal().array() += jitter;
    out.llt.compute(shifted);
    if (out.llt.info() == Eigen::Success && out.llt.matrixLLT().diagonal().allFinite() &&
        (out.llt.matrixLLT().diagonal().array() > 0.0).all()) {
      out.jitter = jitter;
      return out;
    }
    rcond = out.llt.info() == Eigen::Success ? out.llt.rcond() : 0.0;
  }
  const double cond = rcond > 0.0 ? 1.0 / rcond : std::numeric_limits<double>::infinity();
  std::ostringstream msg;
  msg << context << ": Cholesky failed at maximum jitter (condition estimate " << cond << ")";
  throw SingularMatrixError(msg.str(), cond);
}

double clamp_variance(double v, double prior_scale, const char* context) {
  if (v >= 0.0) return v;
  if (v >= -1e-10 * std::abs(prior_scale)) return 0.0;
  std::ostringstream msg;
  msg << context << ": negative variance " << v << " beyond clamp tolerance";
  throw std::runtime_error(msg.str());
}

GpPosterior::GpPosterior(const KernelSpec& spec, Dataset data, Factorization fact)
    : spec_(spec), data_(std::move(data)), fact_(std::move(fact)) {
  alpha_ = fact_.llt.solve(data_.targets);
}

GpPosterior GpPosterior::fit(const KernelSpec& spec, Dataset data, const JitterPolicy& policy) {
  data.validate();
  Matrix k = gram(spec, data.inputs);
  k.diagonal() += data.noise;
  Factorization fact = factorize(k, policy, "gp fit");
  return GpPosterior(spec, std::move(data), std::move(fact));
}

double GpPosterior::predict_mean(PointView x) const {
  return kernel_row(spec_, x, data_.inputs).dot(alpha_);
}

Vector GpPosterior::predict_mean(const PointSet& xs) const {
  return cross_gram(spec_, xs, data_.inputs) * alpha_;
}

double GpPosterior::predict_cov(PointView x, PointView y) const {
  const Vector kx = kernel_row(spec_, x, data_.inputs);
  const Vector ky = kernel_row(spec_, y, data_.inputs);
  return eval(spec_, x, y) - kx.dot(fact_.llt.solve(ky));
}

double GpPosterior::predict_var(PointView x) const {
  const Vector kx = kernel_row(spec_, x, data_.inputs);
  const Vector v = fact_.llt.matrixL().solve(kx);
  const double prior = eval(spec_, x, x);
  return clamp_variance(prior - v.squaredNorm(), prior, "gp predict_var");
}

Matrix GpPosterior::predict_cov(const PointSet& xs) const {
  const Matrix kx = cross_gram(spec_, data_.inputs, xs);
  const Matrix v = fact_.llt.matrixL().solve(kx);
  Matrix out = gram(spec_, xs) - v.transpose() * v;
  for (Index i = 0; i < out.rows(); ++i) {
    const double prior = out(i, i) + v.col(i).squaredNorm();
    out(i, i) = clamp_variance(out(i, i), prior, "gp predict_cov");
  }
  return out;
}

Vector GpPosterior::solve(const Vector& b) const { return fact_.llt.solve(b); }

double GpPosterior::log_marginal_likelihood() const {
  const Index n = data_.size();
  const double logdet = 2.0 * fact_.llt.matrixLLT().diagonal().array().log().sum();
  return -0.5 * (data_.targets.dot(alpha_) + logdet + static_cast<double>(n) * std::log(2.0 * std::numbers::pi));
}

double log_marginal_likelihood(const KernelSpec& spec, const Dataset& data, const JitterPolicy& policy) {
  return GpPosterior::fit(spec, data, policy).log_marginal_likelihood();
}

}  // namespace kdisc

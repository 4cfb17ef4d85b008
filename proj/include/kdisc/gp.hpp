#pragma once

#include "kdisc/kernels.hpp"
#include "kdisc/types.hpp"

#include <Eigen/Cholesky>

#include <string>
#include <vector>

namespace kdisc {

struct Dataset {
  PointSet inputs;
  Vector targets;
  Vector noise;  // per-point observation variance, >= 0

  static Dataset noise_free(PointSet inputs, Vector targets);
  static Dataset with_noise(PointSet inputs, Vector targets, Vector noise);

  Index size() const noexcept { return inputs.rows(); }
  void validate() const;
};

// Jitter levels are multiples of mean(diag K), tried in order until the
// Cholesky factorization succeeds.
struct JitterPolicy {
  std::vector<double> relative_levels;

  static JitterPolicy standard() { return {{0.0, 1e-12, 1e-10, 1e-8, 1e-6}}; }
  static JitterPolicy none() { return {{0.0}}; }
  static JitterPolicy fixed(double relative) { return {{relative}}; }
};

struct Factorization {
  Eigen::LLT<Matrix> llt;
  double jitter = 0.0;  // absolute value added to the diagonal
};

// Factorizes a symmetric matrix, escalating jitter per the policy. Throws
// SingularMatrixError if every level fails.
Factorization factorize(const Matrix& a, const JitterPolicy& policy, const std::string& context = "gp");

// Applies the variance clamp: values in [-1e-10 * prior_scale, 0) become 0,
// anything more negative throws.
double clamp_variance(double v, double prior_scale, const char* context = "variance");

class GpPosterior {
 public:
  static GpPosterior fit(const KernelSpec& spec, Dataset data,
                         const JitterPolicy& policy = JitterPolicy::standard());

  double predict_mean(PointView x) const;
  Vector predict_mean(const PointSet& xs) const;
  double predict_cov(PointView x, PointView y) const;
  double predict_var(PointView x) const;
  Matrix predict_cov(const PointSet& xs) const;

  // Solves (K + D + jitter I) z = b.
  Vector solve(const Vector& b) const;
  Matrix lower() const { return fact_.llt.matrixL(); }

  const KernelSpec& spec() const noexcept { return spec_; }
  const Dataset& data() const noexcept { return data_; }
  const Vector& alpha() const noexcept { return alpha_; }
  double jitter() const noexcept { return fact_.jitter; }
  double log_marginal_likelihood() const;

 private:
  GpPosterior(const KernelSpec& spec, Dataset data, Factorization fact);

  KernelSpec spec_;
  Dataset data_;
  Factorization fact_;
  Vector alpha_;
};

double log_marginal_likelihood(const KernelSpec& spec, const Dataset& data,
                               const JitterPolicy& policy = JitterPolicy::standard());

}  // namespace kdisc

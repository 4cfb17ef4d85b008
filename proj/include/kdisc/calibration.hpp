#pragma once

#include "kdisc/kernels.hpp"
#include "kdisc/rng.hpp"
#include "kdisc/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace kdisc {

// Strictly increasing nodes 0 < x_1 < ... < x_N <= T.
class Partition {
 public:
  Partition(double T, std::vector<double> points);
  // x_n = n T / N.
  static Partition uniform(double T, Index n);

  double T() const noexcept { return t_; }
  Index size() const noexcept { return static_cast<Index>(x_.size()); }
  double operator[](Index i) const { return x_[static_cast<std::size_t>(i)]; }
  const std::vector<double>& points() const noexcept { return x_; }
  PointSet as_points() const;
  bool is_uniform() const noexcept { return uniform_; }

 private:
  double t_;
  std::vector<double> x_;
  bool uniform_ = false;
};

enum class ScaleEstimator { CV, ML, ICV };

std::string scale_estimator_name(ScaleEstimator e);

struct ScaleEstimate {
  double value = 0.0;
  ScaleEstimator estimator = ScaleEstimator::CV;
  Index n = 0;
};

// Unnormalized pieces of the Brownian leave-one-out sum: N * cv = b1 + interior + b2.
struct CvTerms {
  double b1 = 0.0;
  double interior = 0.0;
  double b2 = 0.0;
};

CvTerms cv_terms(const Partition& part, const Vector& f);
ScaleEstimate cv_estimate(const Partition& part, const Vector& f);
ScaleEstimate ml_estimate(const Partition& part, const Vector& f);
ScaleEstimate icv_estimate(const Partition& part, const Vector& f);
ScaleEstimate scale_estimate(ScaleEstimator which, const Partition& part, const Vector& f);

// Leave-one-out and quadratic-form definitions through gp_core, for any kernel
// (evaluated at unit amplitude).
double generic_cv_estimate(const KernelSpec& spec, const PointSet& x, const Vector& f);
double generic_ml_estimate(const KernelSpec& spec, const PointSet& x, const Vector& f);

// Tridiagonal inverse of the Brownian Gram matrix min(x_i, x_j).
Matrix bm_gram_inverse(const Partition& part);
double bm_posterior_mean(const Partition& part, const Vector& f, double x);
double bm_posterior_cov(const Partition& part, double x, double y);

// Sum of squared increments with x_0 = 0, f(x_0) = 0.
double quadratic_variation(const Partition& part, const Vector& f);

// Least-squares slope of log(values) against log(ns).
double rate_slope(const std::vector<double>& ns, const std::vector<double>& values);

enum class ProcessKind { FBM, IFBM, BM, OU, IIFBM, PiecewiseJump };

std::string process_name(ProcessKind p);

struct PathSamplerSpec {
  ProcessKind process = ProcessKind::BM;
  double hurst = 0.5;
  double rate = 1.0;  // OU only
  Partition grid = Partition::uniform(1.0, 1);
  std::uint64_t seed = 0;
};

// Exact Gaussian sampler on a grid. The factorization is computed once and
// reused across draws.
class PathSampler {
 public:
  PathSampler(ProcessKind process, const Partition& grid, double hurst = 0.5, double rate = 1.0);

  Vector sample(RngStream& rng) const;
  // One column per stream.
  Matrix sample(std::vector<RngStream>& streams) const;

  const Partition& grid() const noexcept { return grid_; }
  double jitter() const noexcept { return jitter_; }

 private:
  Matrix increments_from_normals(const Matrix& z) const;

  ProcessKind process_;
  Partition grid_;
  double hurst_;
  double rate_;
  Matrix lower_;  // Cholesky factor of the increment covariance (FBM, IFBM, IIFBM)
  double jitter_ = 0.0;
};

// Covariance of the increments B(x_n) - B(x_{n-1}) of fractional Brownian motion.
Matrix fbm_increment_cov(const Partition& grid, double hurst);
// Covariance of the cell integrals of fractional Brownian motion, whose partial
// sums give integrated fBm on the grid.
Matrix ifbm_cell_cov(const Partition& grid, double hurst);

Vector sample_path(const PathSamplerSpec& spec);

// Integral over [0, T] of the Brownian posterior mean.
double bm_bq_mean(const Partition& part, const Vector& f);
// Posterior variance of that integral.
double bm_bq_variance(const Partition& part);

double calibration_ratio(const std::vector<double>& squared_errors, const std::vector<double>& tau2_hats,
                         double var_bq);

struct CalibRatios {
  double r_cv = 0.0;
  double r_ml = 0.0;
  double r_icv = 0.0;
  double mean_squared_error = 0.0;
  double var_bq = 0.0;
};

// Monte Carlo ratios E[(I - I_BQ)^2] / (E[tau2_hat] var_BQ) on the uniform grid
// with N nodes. The true integral uses trapezoid on a grid 16 times finer.
CalibRatios calib_ratio_bq(ProcessKind process, double hurst, Index n, Index seeds, std::uint64_t seed,
                           double T = 1.0);

}  // namespace kdisc

#pragma once

#include "kdisc/bq.hpp"
#include "kdisc/gp.hpp"
#include "kdisc/kernels.hpp"
#include "kdisc/types.hpp"

#include <functional>
#include <optional>
#include <vector>

namespace kdisc {

struct ConditionalTask {
  PointSet thetas;                // T x p
  std::vector<PointSet> samples;  // per t: N x d draws from P_theta_t
  std::vector<Vector> fvals;      // per t: f(x_n^t, theta_t)
  std::function<Measure(PointView theta)> measure;
  KernelSpec kernel_x;
  KernelSpec kernel_theta;

  Index size() const noexcept { return thetas.rows(); }
  Index samples_per_theta() const { return samples.empty() ? 0 : samples.front().rows(); }
  void validate() const;
};

// Affine map applied to every function value before fitting.
struct Standardization {
  double shift = 0.0;
  double scale = 1.0;

  static Standardization identity() { return {}; }
  // Empirical mean and standard deviation over all values; zero spread keeps scale 1.
  static Standardization fit(const std::vector<Vector>& fvals);
};

struct CbqPosterior {
  std::vector<double> stage1_mean;  // standardized units
  std::vector<double> stage1_var;
  std::vector<Vector> stage1_weights;
  std::optional<GpPosterior> stage2;
  double lambda_theta = 0.0;
  Standardization standardization;
};

struct CbqPrediction {
  double mean = 0.0;
  double variance = 0.0;
  // mean = offset + sum_t sum_n weights[t](n) f(x_n^t, theta_t), with
  // weights[t] = w_t v^t (stage-2 weight times stage-1 weights).
  std::vector<Vector> weights;
  double offset = 0.0;
};

CbqPosterior cbq_fit(const ConditionalTask& task, double lambda_theta, double lambda_x = 0.0,
                     const Standardization& standardization = Standardization::identity());
CbqPrediction cbq_predict(const CbqPosterior& post, PointView theta);

// Least-squares Monte Carlo: total-degree polynomial regression on stage-1 means.
struct PolynomialModel {
  int degree = 0;
  std::vector<std::vector<int>> exponents;
  Vector coeffs;

  double predict(PointView theta) const;
};

Matrix polynomial_design(const PointSet& thetas, const std::vector<std::vector<int>>& exponents);
std::vector<std::vector<int>> monomial_exponents(Index dim, int degree);
PolynomialModel lsmc_fit(const PointSet& thetas, const Vector& targets, int degree);
// Degree with the lowest held-out RMSE.
int select_lsmc_degree(const PointSet& train_thetas, const Vector& train_targets, const PointSet& val_thetas,
                       const Vector& val_targets, const std::vector<int>& degrees = {1, 2, 3, 4});

// Kernel ridge regression on stage-1 means.
struct KernelRidgeModel {
  KernelSpec kernel;
  PointSet thetas;
  Vector solution;

  double predict(PointView theta) const;
};

KernelRidgeModel klsmc_fit(const PointSet& thetas, const Vector& targets, const KernelSpec& kernel, double ridge);

Vector monte_carlo_means(const ConditionalTask& task);

struct GridSelection {
  double amplitude = 1.0;
  double lengthscale = 1.0;
  double lambda = 0.0;
  double log_likelihood = 0.0;
  std::vector<double> all_log_likelihoods;
};

// Maximizes the GP log marginal likelihood over amplitude x lengthscale x lambda,
// with observation noise base_noise + lambda.
GridSelection select_hyperparameters(const KernelSpec& base, const PointSet& inputs, const Vector& targets,
                                     const Vector& base_noise, const std::vector<double>& amplitudes,
                                     const std::vector<double>& lengthscales, const std::vector<double>& lambdas);

struct CbqGrids {
  std::vector<double> amplitudes{1.0, 10.0, 100.0, 1000.0};
  std::vector<double> lengthscales{0.1, 0.3, 1.0, 3.0, 10.0};
  std::vector<double> lambdas{0.01, 0.1, 1.0};
};

struct CbqHyperparameters {
  KernelSpec kernel_x;
  KernelSpec kernel_theta;
  double lambda_theta = 0.0;
  GridSelection stage1;
  GridSelection stage2;
};

// Stage-1 kernel fitted on t = 1 only and reused for every t; stage 2 selected
// with the resulting BQ variances in the noise.
CbqHyperparameters empirical_bayes_grid(const ConditionalTask& task, const CbqGrids& grids = {},
                                        const Standardization& standardization = Standardization::identity());

}  // namespace kdisc

#pragma once

#include "kdisc/kernels.hpp"
#include "kdisc/mmd.hpp"
#include "kdisc/rng.hpp"
#include "kdisc/types.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace kdisc {

// Unit-norm RKHS function u(x) = sum_m coeffs_m k(z_m, x) / (norm sqrt(M)).
struct ProjectionDirection {
  KernelSpec kernel;
  PointSet anchors;
  Vector coeffs;
  double norm = 0.0;

  double evaluate(PointView x) const;
  Vector evaluate(const PointSet& xs) const;
  // RKHS norm of u recomputed from the representation; 1 up to rounding.
  double unit_norm() const;
};

struct QuantileWeighting {
  enum class Kind { Uniform, Custom };
  Kind kind = Kind::Uniform;
  std::function<double(double)> density;

  static QuantileWeighting uniform() { return {}; }
  static QuantileWeighting custom(std::function<double(double)> density);
  double operator()(double alpha) const { return kind == Kind::Uniform ? 1.0 : density(alpha); }
};

enum class ReferenceRule {
  Pooled,          // anchors resampled from (P_N + Q_N) / 2
  ScaledGaussian,  // N(median, (IQR / 1.349)^2) per coordinate
  ScaledUniform,   // uniform on median +- IQR / 2 per coordinate
};

struct KqdConfig {
  int p = 2;
  Index directions = 1;  // L
  Index anchors = 1;     // M
  std::uint64_t seed = 0;
  ReferenceRule reference = ReferenceRule::Pooled;

  // L = M = ceil(log N).
  static KqdConfig log_scaled(Index n, int p, std::uint64_t seed);
  void validate() const;
};

std::vector<ProjectionDirection> sample_directions(const KernelSpec& spec, const KqdConfig& cfg,
                                                   const PointSet& pooled);

// The ceil(alpha N)-th smallest value, index clamped to [1, N].
double directional_quantile(std::span<const double> values, double alpha);
double directional_quantile(const ProjectionDirection& u, const PointSet& sample, double alpha);

// Projections of every point onto every direction: row l holds u_l(x_{1:N}).
Matrix project(const std::vector<ProjectionDirection>& dirs, const PointSet& xs);

// (1/N) sum_n |a_(n) - b_(n)|^p f_nu(n/N) for already sorted rows.
double sorted_quantile_distance(std::span<const double> a_sorted, std::span<const double> b_sorted, int p,
                                const QuantileWeighting& nu);

// Per-direction terms tau_l^p from projection matrices (rows are directions).
Vector directional_terms(const Matrix& proj_p, const Matrix& proj_q, int p, const QuantileWeighting& nu);

double ekqd_p(const std::vector<ProjectionDirection>& dirs, const PointSet& p, const PointSet& q, int power,
              const QuantileWeighting& nu = QuantileWeighting::uniform());
double supkqd_p(const std::vector<ProjectionDirection>& dirs, const PointSet& p, const PointSet& q, int power,
                const QuantileWeighting& nu = QuantileWeighting::uniform());
double ekqd_centered(const KernelSpec& spec, const std::vector<ProjectionDirection>& dirs, const PointSet& p,
                     const PointSet& q, const QuantileWeighting& nu = QuantileWeighting::uniform());

// Draw directions from the pooled sample, then evaluate.
double ekqd_p(const KernelSpec& spec, const EmpiricalMeasure& p, const EmpiricalMeasure& q, const KqdConfig& cfg,
              const QuantileWeighting& nu = QuantileWeighting::uniform());
double supkqd_p(const KernelSpec& spec, const EmpiricalMeasure& p, const EmpiricalMeasure& q, const KqdConfig& cfg,
                const QuantileWeighting& nu = QuantileWeighting::uniform());
double ekqd_centered(const KernelSpec& spec, const EmpiricalMeasure& p, const EmpiricalMeasure& q,
                     const KqdConfig& cfg, const QuantileWeighting& nu = QuantileWeighting::uniform());

// Distance scale of a p-th power value.
double kqd_root(double value_p, int p);

}  // namespace kdisc

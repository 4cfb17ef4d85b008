#pragma once

#include "kdisc/kernels.hpp"
#include "kdisc/types.hpp"

#include <cstdint>
#include <optional>
#include <string>

namespace kdisc {

struct EmpiricalMeasure {
  PointSet points;
  std::optional<Vector> weights;

  static EmpiricalMeasure uniform(PointSet points);
  static EmpiricalMeasure weighted(PointSet points, Vector weights);

  Index size() const noexcept { return points.rows(); }
  Index dim() const noexcept { return points.cols(); }
  // Explicit weights, or 1/N for each point.
  Vector effective_weights() const;
};

enum class EstimatorKind { V, U, Linear, Multi, Weighted, EKQD, SupKQD, CenteredEKQD };

std::string estimator_name(EstimatorKind kind);

struct DiscrepancyEstimate {
  double value = 0.0;
  EstimatorKind estimator = EstimatorKind::V;
  Index n = 0;
  Index m = 0;
  int subdiagonals = 0;
  std::string kernel;
  std::uint64_t seed = 0;
};

// Sum_{i,j} k(a_i, b_j). Row sums are reduced in fixed order, so the result
// does not depend on the thread count.
double kernel_sum(const KernelSpec& spec, const PointSet& a, const PointSet& b);
// Sum_{i,j} k(a_i, a_j), optionally skipping i == j. Exploits symmetry.
double kernel_sum_self(const KernelSpec& spec, const PointSet& a, bool include_diagonal);
// Sum_{i,j} wa_i wb_j k(a_i, b_j).
double weighted_kernel_sum(const KernelSpec& spec, const PointSet& a, const Vector& wa, const PointSet& b,
                           const Vector& wb);

namespace reference {
double kernel_sum(const KernelSpec& spec, const PointSet& a, const PointSet& b);
double kernel_sum_self(const KernelSpec& spec, const PointSet& a, bool include_diagonal);
double weighted_kernel_sum(const KernelSpec& spec, const PointSet& a, const Vector& wa, const PointSet& b,
                           const Vector& wb);
}  // namespace reference

// Explicit feature map for kernels with a small finite-dimensional RKHS
// (Linear, Polynomial), so that k(x, y) = phi(x) . phi(y). Returns nothing
// for other families or when the feature count exceeds max_features.
std::optional<Matrix> feature_map(const KernelSpec& spec, const PointSet& points, Index max_features = 4096);

double mmd2_v(const KernelSpec& spec, const EmpiricalMeasure& p, const EmpiricalMeasure& q);
double mmd2_u(const KernelSpec& spec, const EmpiricalMeasure& p, const EmpiricalMeasure& q);
double mmd2_linear(const KernelSpec& spec, const EmpiricalMeasure& p, const EmpiricalMeasure& q);
double mmd2_multi(const KernelSpec& spec, const EmpiricalMeasure& p, const EmpiricalMeasure& q, Index subdiagonals);
double mmd2_weighted(const KernelSpec& spec, const EmpiricalMeasure& p, const EmpiricalMeasure& q);
// Same, with the Q-Q term (1/M^2) sum k(y, y') supplied by the caller.
double mmd2_weighted(const KernelSpec& spec, const EmpiricalMeasure& p, const EmpiricalMeasure& q, double qq_mean);

}  // namespace kdisc

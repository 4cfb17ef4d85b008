#include "kdisc/mmd.hpp"

#include <functional>
#include <stdexcept>
#include <vector>

namespace kdisc {

EmpiricalMeasure EmpiricalMeasure::uniform(PointSet points) {
  if (points.rows() < 1) throw ShapeError("empirical measure: no points");
  return {std::move(points), std::nullopt};
}

EmpiricalMeasure EmpiricalMeasure::weighted(PointSet points, Vector weights) {
  if (points.rows() < 1) throw ShapeError("empirical measure: no points");
  if (weights.size() != points.rows()) throw ShapeError("empirical measure: weight count differs from point count");
  if (!weights.allFinite()) throw std::invalid_argument("empirical measure: weights must be finite");
  return {std::move(points), std::move(weights)};
}

Vector EmpiricalMeasure::effective_weights() const {
  if (weights) return *weights;
  return Vector::Constant(points.rows(), 1.0 / static_cast<double>(points.rows()));
}

std::string estimator_name(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::V: return "mmd_v";
    case EstimatorKind::U: return "mmd_u";
    case EstimatorKind::Linear: return "mmd_lin";
    case EstimatorKind::Multi: return "mmd_multi";
    case EstimatorKind::Weighted: return "mmd_weighted";
    case EstimatorKind::EKQD: return "ekqd";
    case EstimatorKind::SupKQD: return "supkqd";
    case EstimatorKind::CenteredEKQD: return "ekqd_centered";
  }
  return "unknown";
}

namespace {

void require_same_dim(const PointSet& a, const PointSet& b) {
  if (a.cols() != b.cols()) throw ShapeError("mmd: dimension mismatch");
}

void require_nonempty(const EmpiricalMeasure& p, const EmpiricalMeasure& q) {
  if (p.size() < 1 || q.size() < 1) throw ShapeError("mmd: empty measure");
  require_same_dim(p.points, q.points);
}

double ordered_sum(const std::vector<double>& parts) {
  double s = 0.0;
  for (double v : parts) s += v;
  return s;
}

Vector column_sums(const Matrix& features, const Vector* weights) {
  if (weights) return features.transpose() * *weights;
  return features.colwise().sum().transpose();
}

}  // namespace

double kernel_sum(const KernelSpec& spec, const PointSet& a, const PointSet& b) {
  require_same_dim(a, b);
  check_domain(spec, a);
  check_domain(spec, b);
  const Index n = a.rows();
  const Index m = b.rows();
  const Index d = a.cols();
  std::vector<double> rows(static_cast<std::size_t>(n), 0.0);
  visit_kernel(spec, [&](const auto& k) {
#pragma omp parallel for schedule(static)
    for (Index i = 0; i < n; ++i) {
      const double* ai = a.row(i).data();
      double s = 0.0;
      for (Index j = 0; j < m; ++j) s += k(ai, b.row(j).data(), d);
      rows[static_cast<std::size_t>(i)] = s;
    }
    return 0;
  });
  return ordered_sum(rows);
}

double kernel_sum_self(const KernelSpec& spec, const PointSet& a, bool include_diagonal) {
  check_domain(spec, a);
  const Index n = a.rows();
  const Index d = a.cols();
  std::vector<double> rows(static_cast<std::size_t>(n), 0.0);
  visit_kernel(spec, [&](const auto& k) {
#pragma omp parallel for schedule(dynamic, 64)
    for (Index i = 0; i < n; ++i) {
      const double* ai = a.row(i).data();
      double s = 0.0;
      for (Index j = 0; j < i; ++j) s += k(ai, a.row(j).data(), d);
      s *= 2.0;
      if (include_diagonal) s += k(ai, ai, d);
      rows[static_cast<std::size_t>(i)] = s;
    }
    return 0;
  });
  return ordered_sum(rows);
}

double weighted_kernel_sum(const KernelSpec& spec, const PointSet& a, const Vector& wa, const PointSet& b,
                           const Vector& wb) {
  require_same_dim(a, b);
  check_domain(spec, a);
  check_domain(spec, b);
  const Index n = a.rows();
  const Index m = b.rows();
  const Index d = a.cols();
  std::vector<double> rows(static_cast<std::size_t>(n), 0.0);
  visit_kernel(spec, [&](const auto& k) {
#pragma omp parallel for schedule(static)
    for (Index i = 0; i < n; ++i) {
      const double* ai = a.row(i).data();
      double s = 0.0;
      for (Index j = 0; j < m; ++j) s += wb(j) * k(ai, b.row(j).data(), d);
      rows[static_cast<std::size_t>(i)] = wa(i) * s;
    }
    return 0;
  });
  return ordered_sum(rows);
}

namespace reference {

double kernel_sum(const KernelSpec& spec, const PointSet& a, const PointSet& b) {
  double s = 0.0;
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < b.rows(); ++j) s += eval(spec, point(a, i), point(b, j));
  return s;
}

double kernel_sum_self(const KernelSpec& spec, const PointSet& a, bool include_diagonal) {
  double s = 0.0;
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < a.rows(); ++j)
      if (include_diagonal || i != j) s += eval(spec, point(a, i), point(a, j));
  return s;
}

double weighted_kernel_sum(const KernelSpec& spec, const PointSet& a, const Vector& wa, const PointSet& b,
                           const Vector& wb) {
  double s = 0.0;
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < b.rows(); ++j) s += wa(i) * wb(j) * eval(spec, point(a, i), point(b, j));
  return s;
}

}  // namespace reference

std::optional<Matrix> feature_map(const KernelSpec& spec, const PointSet& points, Index max_features) {
  const Index n = points.rows();
  const Index d = points.cols();
  if (spec.family == KernelFamily::Linear) {
    if (d > max_features) return std::nullopt;
    return Matrix(std::sqrt(spec.tau2) * points);
  }
  if (spec.family != KernelFamily::Polynomial) return std::nullopt;

  // (x.y + c)^q = sum over multi-indices a with |a| <= q of
  //   q! / (a! (q - |a|)!) c^(q - |a|) x^a y^a.
  const int q = spec.degree;
  std::vector<std::vector<int>> indices;
  std::vector<int> current(static_cast<std::size_t>(d), 0);
  std::function<void(Index, int)> enumerate = [&](Index dim, int remaining) {
    if (dim == d) {
      indices.push_back(current);
      return;
    }
    for (int e = 0; e <= remaining; ++e) {
      current[static_cast<std::size_t>(dim)] = e;
      enumerate(dim + 1, remaining - e);
    }
    current[static_cast<std::size_t>(dim)] = 0;
  };
  // Count first so huge expansions bail out before enumerating.
  double count = 1.0;
  for (int i = 1; i <= q; ++i) count = count * static_cast<double>(d + i) / i;
  if (count > static_cast<double>(max_features)) return std::nullopt;
  enumerate(0, q);

  auto factorial = [](int k) {
    double f = 1.0;
    for (int i = 2; i <= k; ++i) f *= i;
    return f;
  };
  std::vector<double> scale;
  std::vector<std::size_t> kept;
  for (std::size_t a = 0; a < indices.size(); ++a) {
    int total = 0;
    double denom = 1.0;
    for (int e : indices[a]) {
      total += e;
      denom *= factorial(e);
    }
    const int rest = q - total;
    const double coef = spec.tau2 * factorial(q) / (denom * factorial(rest)) * std::pow(spec.offset, rest);
    if (coef == 0.0) continue;
    kept.push_back(a);
    scale.push_back(std::sqrt(coef));
  }

  Matrix phi(n, static_cast<Index>(kept.size()));
  for (Index i = 0; i < n; ++i) {
    for (std::size_t f = 0; f < kept.size(); ++f) {
      const auto& alpha = indices[kept[f]];
      double v = scale[f];
      for (Index j = 0; j < d; ++j)
        for (int e = 0; e < alpha[static_cast<std::size_t>(j)]; ++e) v *= points(i, j);
      phi(i, static_cast<Index>(f)) = v;
    }
  }
  return phi;
}

double mmd2_v(const KernelSpec& spec, const EmpiricalMeasure& p, const EmpiricalMeasure& q) {
  require_nonempty(p, q);
  // Identical lists give exactly zero; the symmetric and cross sums below
  // round differently.
  if (p.points.rows() == q.points.rows() && p.points == q.points) return 0.0;
  const double n = static_cast<double>(p.size());
  const double m = static_cast<double>(q.size());
  if (auto fp = feature_map(spec, p.points)) {
    const Vector mp = column_sums(*fp, nullptr) / n;
    const Vector mq = column_sums(*feature_map(spec, q.points), nullptr) / m;
    return (mp - mq).squaredNorm();
  }
  const double pp = kernel_sum_self(spec, p.points, true) / (n * n);
  const double qq = kernel_sum_self(spec, q.points, true) / (m * m);
  const double pq = kernel_sum(spec, p.points, q.points) / (n * m);
  return pp + qq - 2.0 * pq;
}

double mmd2_u(const KernelSpec& spec, const EmpiricalMeasure& p, const EmpiricalMeasure& q) {
  require_nonempty(p, q);
  if (p.size() < 2 || q.size() < 2) throw ShapeError("mmd2_u: need at least two points per sample");
  const double n = static_cast<double>(p.size());
  const double m = static_cast<double>(q.size());
  if (auto fp = feature_map(spec, p.points)) {
    const Matrix fq = *feature_map(spec, q.points);
    const Vector sp = column_sums(*fp, nullptr);
    const Vector sq = column_sums(fq, nullptr);
    const double pp = (sp.squaredNorm() - fp->squaredNorm()) / (n * (n - 1.0));
    const double qq = (sq.squaredNorm() - fq.squaredNorm()) / (m * (m - 1.0));
    return pp + qq - 2.0 * sp.dot(sq) / (n * m);
  }
  const double pp = kernel_sum_self(spec, p.points, false) / (n * (n - 1.0));
  const double qq = kernel_sum_self(spec, q.points, false) / (m * (m - 1.0));
  const double pq = kernel_sum(spec, p.points, q.points) / (n * m);
  return pp + qq - 2.0 * pq;
}

double mmd2_linear(const KernelSpec& spec, const EmpiricalMeasure& p, const EmpiricalMeasure& q) {
  require_nonempty(p, q);
  if (p.size() != q.size()) throw ShapeError("mmd2_linear: samples must have equal size");
  if (p.size() < 2) throw ShapeError("mmd2_linear: need at least two points per sample");
  check_domain(spec, p.points);
  check_domain(spec, q.points);
  const Index blocks = p.size() / 2;
  const Index d = p.dim();
  return visit_kernel(spec, [&](const auto& k) {
    double s = 0.0;
    for (Index b = 0; b < blocks; ++b) {
      const double* x1 = p.points.row(2 * b).data();
      const double* x2 = p.points.row(2 * b + 1).data();
      const double* y1 = q.points.row(2 * b).data();
      const double* y2 = q.points.row(2 * b + 1).data();
      s += k(x1, x2, d) + k(y1, y2, d) - k(x1, y2, d) - k(x2, y1, d);
    }
    return s / static_cast<double>(blocks);
  });
}

double mmd2_multi(const KernelSpec& spec, const EmpiricalMeasure& p, const EmpiricalMeasure& q, Index subdiagonals) {
  require_nonempty(p, q);
  if (p.size() != q.size()) throw ShapeError("mmd2_multi: samples must have equal size");
  const Index n = p.size();
  const Index r_max = subdiagonals;
  if (r_max < 1 || r_max > n - 1) throw std::invalid_argument("mmd2_multi: subdiagonal count must be in [1, N-1]");
  check_domain(spec, p.points);
  check_domain(spec, q.points);
  const Index d = p.dim();
  std::vector<double> per_r(static_cast<std::size_t>(r_max), 0.0);
  visit_kernel(spec, [&](const auto& k) {
#pragma omp parallel for schedule(dynamic, 1)
    for (Index r = 1; r <= r_max; ++r) {
      double s = 0.0;
      for (Index i = 0; i + r < n; ++i) {
        const double* xi = p.points.row(i).data();
        const double* xr = p.points.row(i + r).data();
        const double* yi = q.points.row(i).data();
        const double* yr = q.points.row(i + r).data();
        s += k(xi, xr, d) + k(yi, yr, d) - k(xi, yr, d) - k(xr, yi, d);
      }
      per_r[static_cast<std::size_t>(r - 1)] = s;
    }
    return 0;
  });
  const double rr = static_cast<double>(r_max);
  return 2.0 / (rr * (2.0 * static_cast<double>(n) - rr - 1.0)) * ordered_sum(per_r);
}

double mmd2_weighted(const KernelSpec& spec, const EmpiricalMeasure& p, const EmpiricalMeasure& q) {
  require_nonempty(p, q);
  const double m = static_cast<double>(q.size());
  const double qq = kernel_sum_self(spec, q.points, true) / (m * m);
  return mmd2_weighted(spec, p, q, qq);
}

double mmd2_weighted(const KernelSpec& spec, const EmpiricalMeasure& p, const EmpiricalMeasure& q, double qq_mean) {
  require_nonempty(p, q);
  if (!p.weights) throw std::invalid_argument("mmd2_weighted: P must carry explicit weights");
  const Vector& w = *p.weights;
  const Vector uq = Vector::Constant(q.size(), 1.0 / static_cast<double>(q.size()));
  const double pp = weighted_kernel_sum(spec, p.points, w, p.points, w);
  const double pq = weighted_kernel_sum(spec, p.points, w, q.points, uq);
  return pp - 2.0 * pq + qq_mean;
}

}  // namespace kdisc

#include "kdisc/kqd.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace kdisc {

double ProjectionDirection::evaluate(PointView x) const {
  const Vector k = kernel_row(kernel, x, anchors);
  return k.dot(coeffs) / (norm * std::sqrt(static_cast<double>(anchors.rows())));
}

Vector ProjectionDirection::evaluate(const PointSet& xs) const {
  const Matrix k = cross_gram(kernel, xs, anchors);
  return k * coeffs / (norm * std::sqrt(static_cast<double>(anchors.rows())));
}

double ProjectionDirection::unit_norm() const {
  const Matrix k = gram(kernel, anchors);
  const double m = static_cast<double>(anchors.rows());
  return std::sqrt(coeffs.dot(k * coeffs) / m) / norm;
}

QuantileWeighting QuantileWeighting::custom(std::function<double(double)> density) {
  if (!density) throw std::invalid_argument("quantile weighting: empty density");
  return {Kind::Custom, std::move(density)};
}

KqdConfig KqdConfig::log_scaled(Index n, int p, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("kqd config: sample size must be positive");
  const Index l = std::max<Index>(1, static_cast<Index>(std::ceil(std::log(static_cast<double>(n)))));
  KqdConfig cfg;
  cfg.p = p;
  cfg.directions = l;
  cfg.anchors = l;
  cfg.seed = seed;
  return cfg;
}

void KqdConfig::validate() const {
  if (p < 1) throw std::invalid_argument("kqd config: p must be >= 1");
  if (directions < 1 || anchors < 1) throw std::invalid_argument("kqd config: L and M must be >= 1");
}

namespace {

struct RobustScale {
  Vector center;
  Vector iqr;
};

double sorted_quantile(std::vector<double>& v, double q) {
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

RobustScale robust_scale(const PointSet& pooled) {
  RobustScale out{Vector(pooled.cols()), Vector(pooled.cols())};
  for (Index j = 0; j < pooled.cols(); ++j) {
    std::vector<double> col;
    col.reserve(static_cast<std::size_t>(pooled.rows()));
    for (Index i = 0; i < pooled.rows(); ++i) col.push_back(pooled(i, j));
    std::sort(col.begin(), col.end());
    out.center(j) = sorted_quantile(col, 0.5);
    out.iqr(j) = sorted_quantile(col, 0.75) - sorted_quantile(col, 0.25);
  }
  return out;
}

}  // namespace

std::vector<ProjectionDirection> sample_directions(const KernelSpec& spec, const KqdConfig& cfg,
                                                   const PointSet& pooled) {
  cfg.validate();
  if (pooled.rows() < 1) throw std::invalid_argument("sample_directions: pooled sample is empty");
  check_domain(spec, pooled);
  RngStream root(cfg.seed, "kqd");
  const Index m = cfg.anchors;
  const Index d = pooled.cols();
  RobustScale scale;
  if (cfg.reference != ReferenceRule::Pooled) scale = robust_scale(pooled);

  std::vector<ProjectionDirection> out;
  out.reserve(static_cast<std::size_t>(cfg.directions));
  for (Index l = 0; l < cfg.directions; ++l) {
    RngStream rng = root.split("direction", static_cast<std::uint64_t>(l));
    ProjectionDirection dir;
    dir.kernel = spec;
    dir.anchors.resize(m, d);
    for (Index a = 0; a < m; ++a) {
      switch (cfg.reference) {
        case ReferenceRule::Pooled:
          dir.anchors.row(a) = pooled.row(static_cast<Index>(rng.below(static_cast<std::uint64_t>(pooled.rows()))));
          break;
        case ReferenceRule::ScaledGaussian:
          for (Index j = 0; j < d; ++j) dir.anchors(a, j) = scale.center(j) + scale.iqr(j) / 1.349 * rng.normal();
          break;
        case ReferenceRule::ScaledUniform:
          for (Index j = 0; j < d; ++j) dir.anchors(a, j) = scale.center(j) + scale.iqr(j) * (rng.uniform() - 0.5);
          break;
      }
    }
    const Matrix k = gram(spec, dir.anchors);
    int attempts = 0;
    for (;;) {
      dir.coeffs.resize(m);
      for (Index a = 0; a < m; ++a) dir.coeffs(a) = rng.normal();
      const double sq = dir.coeffs.dot(k * dir.coeffs) / static_cast<double>(m);
      dir.norm = sq > 0.0 ? std::sqrt(sq) : 0.0;
      if (dir.norm > 1e-12) break;
      if (++attempts >= 100) throw std::runtime_error("sample_directions: 100 consecutive degenerate directions");
    }
    out.push_back(std::move(dir));
  }
  return out;
}

double directional_quantile(std::span<const double> values, double alpha) {
  if (values.empty()) throw std::invalid_argument("directional_quantile: empty sample");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("directional_quantile: alpha must be in (0, 1]");
  const auto n = static_cast<double>(values.size());
  auto rank = static_cast<std::size_t>(std::ceil(alpha * n));
  rank = std::clamp<std::size_t>(rank, 1, values.size());
  std::vector<double> v(values.begin(), values.end());
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(rank - 1), v.end());
  return v[rank - 1];
}

double directional_quantile(const ProjectionDirection& u, const PointSet& sample, double alpha) {
  const Vector v = u.evaluate(sample);
  return directional_quantile(std::span<const double>(v.data(), static_cast<std::size_t>(v.size())), alpha);
}

Matrix project(const std::vector<ProjectionDirection>& dirs, const PointSet& xs) {
  Matrix out(static_cast<Index>(dirs.size()), xs.rows());
#pragma omp parallel for schedule(static)
  for (Index l = 0; l < static_cast<Index>(dirs.size()); ++l)
    out.row(l) = dirs[static_cast<std::size_t>(l)].evaluate(xs).transpose();
  return out;
}

double sorted_quantile_distance(std::span<const double> a_sorted, std::span<const double> b_sorted, int p,
                                const QuantileWeighting& nu) {
  if (a_sorted.size() != b_sorted.size()) throw ShapeError("kqd: samples must have equal size");
  const std::size_t n = a_sorted.size();
  const double inv_n = 1.0 / static_cast<double>(n);
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double diff = std::abs(a_sorted[i] - b_sorted[i]);
    double term = p == 1 ? diff : p == 2 ? diff * diff : std::pow(diff, p);
    if (nu.kind != QuantileWeighting::Kind::Uniform) term *= nu(static_cast<double>(i + 1) * inv_n);
    s += term;
  }
  return s * inv_n;
}

Vector directional_terms(const Matrix& proj_p, const Matrix& proj_q, int p, const QuantileWeighting& nu) {
  if (proj_p.rows() != proj_q.rows()) throw ShapeError("kqd: direction count mismatch");
  if (proj_p.cols() != proj_q.cols()) throw ShapeError("kqd: samples must have equal size");
  const Index l_count = proj_p.rows();
  const auto n = static_cast<std::size_t>(proj_p.cols());
  Vector out(l_count);
#pragma omp parallel for schedule(static)
  for (Index l = 0; l < l_count; ++l) {
    std::vector<double> a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = proj_p(l, static_cast<Index>(i));
      b[i] = proj_q(l, static_cast<Index>(i));
    }
    std::stable_sort(a.begin(), a.end());
    std::stable_sort(b.begin(), b.end());
    out(l) = sorted_quantile_distance(a, b, p, nu);
  }
  return out;
}

namespace {

void require_equal_sizes(const PointSet& p, const PointSet& q) {
  if (p.rows() < 1 || q.rows() < 1) throw ShapeError("kqd: empty sample");
  if (p.rows() != q.rows()) throw ShapeError("kqd: samples must have equal size");
  if (p.cols() != q.cols()) throw ShapeError("kqd: dimension mismatch");
}

double mean_in_order(const Vector& v) {
  double s = 0.0;
  for (Index i = 0; i < v.size(); ++i) s += v(i);
  return s / static_cast<double>(v.size());
}

}  // namespace

double ekqd_p(const std::vector<ProjectionDirection>& dirs, const PointSet& p, const PointSet& q, int power,
              const QuantileWeighting& nu) {
  require_equal_sizes(p, q);
  if (dirs.empty()) throw std::invalid_argument("ekqd: no directions");
  return mean_in_order(directional_terms(project(dirs, p), project(dirs, q), power, nu));
}

double supkqd_p(const std::vector<ProjectionDirection>& dirs, const PointSet& p, const PointSet& q, int power,
                const QuantileWeighting& nu) {
  require_equal_sizes(p, q);
  if (dirs.empty()) throw std::invalid_argument("supkqd: no directions");
  return directional_terms(project(dirs, p), project(dirs, q), power, nu).maxCoeff();
}

double ekqd_centered(const KernelSpec& spec, const std::vector<ProjectionDirection>& dirs, const PointSet& p,
                     const PointSet& q, const QuantileWeighting& nu) {
  require_equal_sizes(p, q);
  if (dirs.empty()) throw std::invalid_argument("ekqd_centered: no directions");
  const Matrix pp = project(dirs, p);
  const Matrix pq = project(dirs, q);
  const double kqd = mean_in_order(directional_terms(pp, pq, 2, nu));
  const Vector gap = pp.rowwise().mean() - pq.rowwise().mean();
  const double mean_gap = mean_in_order(gap.array().square().matrix());
  return kqd + mmd2_u(spec, EmpiricalMeasure::uniform(p), EmpiricalMeasure::uniform(q)) - mean_gap;
}

double ekqd_p(const KernelSpec& spec, const EmpiricalMeasure& p, const EmpiricalMeasure& q, const KqdConfig& cfg,
              const QuantileWeighting& nu) {
  require_equal_sizes(p.points, q.points);
  const auto dirs = sample_directions(spec, cfg, stack(p.points, q.points));
  return ekqd_p(dirs, p.points, q.points, cfg.p, nu);
}

double supkqd_p(const KernelSpec& spec, const EmpiricalMeasure& p, const EmpiricalMeasure& q, const KqdConfig& cfg,
                const QuantileWeighting& nu) {
  require_equal_sizes(p.points, q.points);
  const auto dirs = sample_directions(spec, cfg, stack(p.points, q.points));
  return supkqd_p(dirs, p.points, q.points, cfg.p, nu);
}

double ekqd_centered(const KernelSpec& spec, const EmpiricalMeasure& p, const EmpiricalMeasure& q,
                     const KqdConfig& cfg, const QuantileWeighting& nu) {
  if (cfg.p != 2) throw std::invalid_argument("ekqd_centered: requires p = 2");
  require_equal_sizes(p.points, q.points);
  const auto dirs = sample_directions(spec, cfg, stack(p.points, q.points));
  return ekqd_centered(spec, dirs, p.points, q.points, nu);
}

double kqd_root(double value_p, int p) {
  if (p < 1) throw std::invalid_argument("kqd_root: p must be >= 1");
  return std::pow(std::max(value_p, 0.0), 1.0 / p);
}

}  // namespace kdisc

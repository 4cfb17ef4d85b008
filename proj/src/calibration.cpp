#include "kdisc/calibration.hpp"

#include "kdisc/gp.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace kdisc {

Partition::Partition(double T, std::vector<double> points) : t_(T), x_(std::move(points)) {
  if (!(t_ > 0.0)) throw std::invalid_argument("partition: T must be positive");
  if (x_.empty()) throw std::invalid_argument("partition: no points");
  if (!(x_.front() > 0.0)) throw std::invalid_argument("partition: first point must be positive");
  for (std::size_t i = 1; i < x_.size(); ++i)
    if (!(x_[i] > x_[i - 1])) throw std::invalid_argument("partition: points must be strictly increasing");
  if (x_.back() > t_) throw std::invalid_argument("partition: last point exceeds T");
}

Partition Partition::uniform(double T, Index n) {
  if (n < 1) throw std::invalid_argument("partition: need at least one point");
  std::vector<double> x(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) x[static_cast<std::size_t>(i)] = static_cast<double>(i + 1) * T / static_cast<double>(n);
  x.back() = T;
  Partition p(T, std::move(x));
  p.uniform_ = true;
  return p;
}

PointSet Partition::as_points() const {
  return column(std::span<const double>(x_.data(), x_.size()));
}

std::string scale_estimator_name(ScaleEstimator e) {
  switch (e) {
    case ScaleEstimator::CV: return "CV";
    case ScaleEstimator::ML: return "ML";
    case ScaleEstimator::ICV: return "ICV";
  }
  return "unknown";
}

namespace {

void require_values(const Partition& part, const Vector& f) {
  if (f.size() != part.size()) throw ShapeError("calibration: value count differs from partition size");
}

}  // namespace

CvTerms cv_terms(const Partition& part, const Vector& f) {
  require_values(part, f);
  const Index n = part.size();
  if (n < 3) throw std::invalid_argument("cv: need at least three points");
  CvTerms t;
  const double x1 = part[0];
  const double x2 = part[1];
  const double b1 = x2 * f(0) - x1 * f(1);
  t.b1 = b1 * b1 / (x1 * x2 * (x2 - x1));
  for (Index i = 1; i + 1 < n; ++i) {
    const double dl = part[i] - part[i - 1];
    const double dr = part[i + 1] - part[i];
    const double r = dl * (f(i + 1) - f(i)) - dr * (f(i) - f(i - 1));
    t.interior += r * r / ((dl + dr) * dl * dr);
  }
  const double last = f(n - 1) - f(n - 2);
  t.b2 = last * last / (part[n - 1] - part[n - 2]);
  return t;
}

ScaleEstimate cv_estimate(const Partition& part, const Vector& f) {
  const CvTerms t = cv_terms(part, f);
  return {(t.b1 + t.interior + t.b2) / static_cast<double>(part.size()), ScaleEstimator::CV, part.size()};
}

ScaleEstimate icv_estimate(const Partition& part, const Vector& f) {
  const CvTerms t = cv_terms(part, f);
  return {t.interior / static_cast<double>(part.size()), ScaleEstimator::ICV, part.size()};
}

ScaleEstimate ml_estimate(const Partition& part, const Vector& f) {
  require_values(part, f);
  double s = 0.0;
  double prev_x = 0.0;
  double prev_f = 0.0;
  for (Index i = 0; i < part.size(); ++i) {
    const double df = f(i) - prev_f;
    s += df * df / (part[i] - prev_x);
    prev_x = part[i];
    prev_f = f(i);
  }
  return {s / static_cast<double>(part.size()), ScaleEstimator::ML, part.size()};
}

ScaleEstimate scale_estimate(ScaleEstimator which, const Partition& part, const Vector& f) {
  switch (which) {
    case ScaleEstimator::CV: return cv_estimate(part, f);
    case ScaleEstimator::ML: return ml_estimate(part, f);
    case ScaleEstimator::ICV: return icv_estimate(part, f);
  }
  throw std::invalid_argument("scale_estimate: unknown estimator");
}

double generic_cv_estimate(const KernelSpec& spec, const PointSet& x, const Vector& f) {
  const Index n = x.rows();
  if (n < 2) throw std::invalid_argument("generic_cv: need at least two points");
  const KernelSpec unit = spec.with_amplitude(1.0);
  double s = 0.0;
  for (Index i = 0; i < n; ++i) {
    PointSet rest(n - 1, x.cols());
    Vector frest(n - 1);
    for (Index j = 0, r = 0; j < n; ++j) {
      if (j == i) continue;
      rest.row(r) = x.row(j);
      frest(r) = f(j);
      ++r;
    }
    const auto post = GpPosterior::fit(unit, Dataset::noise_free(std::move(rest), std::move(frest)), JitterPolicy::none());
    const double resid = f(i) - post.predict_mean(point(x, i));
    s += resid * resid / post.predict_var(point(x, i));
  }
  return s / static_cast<double>(n);
}

double generic_ml_estimate(const KernelSpec& spec, const PointSet& x, const Vector& f) {
  const auto post = GpPosterior::fit(spec.with_amplitude(1.0), Dataset::noise_free(x, f), JitterPolicy::none());
  return f.dot(post.alpha()) / static_cast<double>(x.rows());
}

Matrix bm_gram_inverse(const Partition& part) {
  const Index n = part.size();
  Matrix out = Matrix::Zero(n, n);
  double prev = 0.0;
  for (Index i = 0; i < n; ++i) {
    const double left = part[i] - prev;
    if (i + 1 < n) {
      const double right = part[i + 1] - part[i];
      out(i, i) = 1.0 / left + 1.0 / right;
      out(i, i + 1) = -1.0 / right;
      out(i + 1, i) = -1.0 / right;
    } else {
      out(i, i) = 1.0 / left;
    }
    prev = part[i];
  }
  return out;
}

double bm_posterior_mean(const Partition& part, const Vector& f, double x) {
  require_values(part, f);
  if (x < 0.0 || x > part.T()) throw DomainError("bm_posterior_mean: x outside [0, T]");
  const auto& pts = part.points();
  if (x >= pts.back()) return f(part.size() - 1);
  const auto it = std::upper_bound(pts.begin(), pts.end(), x);
  const Index hi = static_cast<Index>(it - pts.begin());
  const double x_lo = hi == 0 ? 0.0 : pts[static_cast<std::size_t>(hi - 1)];
  const double f_lo = hi == 0 ? 0.0 : f(hi - 1);
  const double x_hi = pts[static_cast<std::size_t>(hi)];
  return f_lo + (f(hi) - f_lo) * (x - x_lo) / (x_hi - x_lo);
}

double bm_posterior_cov(const Partition& part, double x, double y) {
  if (x < 0.0 || y < 0.0 || x > part.T() || y > part.T()) throw DomainError("bm_posterior_cov: input outside [0, T]");
  const auto& pts = part.points();
  const double last = pts.back();
  if (x > last && y > last) return std::min(x, y) - last;
  if (x >= last || y >= last) return 0.0;
  const auto cx = std::upper_bound(pts.begin(), pts.end(), x);
  const auto cy = std::upper_bound(pts.begin(), pts.end(), y);
  if (cx != cy) return 0.0;
  const Index hi = static_cast<Index>(cx - pts.begin());
  const double x_lo = hi == 0 ? 0.0 : pts[static_cast<std::size_t>(hi - 1)];
  const double x_hi = pts[static_cast<std::size_t>(hi)];
  if (x == x_lo || y == x_lo) return 0.0;
  return (x_hi - std::max(x, y)) * (std::min(x, y) - x_lo) / (x_hi - x_lo);
}

double quadratic_variation(const Partition& part, const Vector& f) {
  require_values(part, f);
  double s = 0.0;
  double prev = 0.0;
  for (Index i = 0; i < f.size(); ++i) {
    const double d = f(i) - prev;
    s += d * d;
    prev = f(i);
  }
  return s;
}

double rate_slope(const std::vector<double>& ns, const std::vector<double>& values) {
  if (ns.size() != values.size()) throw std::invalid_argument("rate_slope: length mismatch");
  if (ns.size() < 3) throw std::invalid_argument("rate_slope: need at least three points");
  const std::size_t k = ns.size();
  Eigen::VectorXd lx(static_cast<Index>(k));
  Eigen::VectorXd ly(static_cast<Index>(k));
  for (std::size_t i = 0; i < k; ++i) {
    if (!(ns[i] > 0.0) || !(values[i] > 0.0)) throw std::invalid_argument("rate_slope: values must be positive");
    lx(static_cast<Index>(i)) = std::log(ns[i]);
    ly(static_cast<Index>(i)) = std::log(values[i]);
  }
  const Vector cx = lx.array() - lx.mean();
  const Vector cy = ly.array() - ly.mean();
  return cx.dot(cy) / cx.squaredNorm();
}

std::string process_name(ProcessKind p) {
  switch (p) {
    case ProcessKind::FBM: return "FBM";
    case ProcessKind::IFBM: return "IFBM";
    case ProcessKind::BM: return "BM";
    case ProcessKind::OU: return "OU";
    case ProcessKind::IIFBM: return "IIFBM";
    case ProcessKind::PiecewiseJump: return "JUMP";
  }
  return "unknown";
}

namespace {

// |k+1|^p + |k-1|^p - 2|k|^p for integer k >= 0. Large k uses the binomial
// series, which avoids cancelling terms of size k^p.
double second_difference_pow(Index k, double p) {
  if (k < 4) {
    const double kk = static_cast<double>(k);
    return std::pow(kk + 1.0, p) + std::pow(std::abs(kk - 1.0), p) - 2.0 * (k == 0 ? 0.0 : std::pow(kk, p));
  }
  const double kk = static_cast<double>(k);
  const double inv2 = 1.0 / (kk * kk);
  double binom = p * (p - 1.0) / 2.0;
  double power = inv2;
  double sum = 0.0;
  for (int j = 2; j < 200; j += 2) {
    const double term = 2.0 * binom * power;
    sum += term;
    if (std::abs(term) <= 1e-18 * std::abs(sum)) break;
    binom *= (p - j) * (p - j - 1.0) / ((j + 1.0) * (j + 2.0));
    power *= inv2;
  }
  return std::pow(kk, p) * sum;
}

// n^p - (n-1)^p for integer n >= 1.
double power_increment(Index n, double p) {
  const double nn = static_cast<double>(n);
  if (n == 1) return 1.0;
  return -std::pow(nn, p) * std::expm1(p * std::log1p(-1.0 / nn));
}

// Overwrites a with its lower Cholesky factor, escalating jitter on failure.
double inplace_cholesky(Matrix& a, const char* context) {
  const Vector diag = a.diagonal();
  const double scale = diag.mean();
  for (double level : JitterPolicy::standard().relative_levels) {
    const double jitter = level * scale;
    a.diagonal() = diag.array() + jitter;
    Eigen::LLT<Eigen::Ref<Matrix>> llt(a);
    if (llt.info() == Eigen::Success) {
      a.triangularView<Eigen::StrictlyUpper>().setZero();
      return jitter;
    }
    a.triangularView<Eigen::StrictlyLower>() = a.transpose();
  }
  throw SingularMatrixError(std::string(context) + ": covariance factorization failed at maximum jitter",
                            std::numeric_limits<double>::infinity());
}

void cumulative_sum(Matrix& m) {
  for (Index i = 1; i < m.rows(); ++i) m.row(i) += m.row(i - 1);
}

}  // namespace

Matrix fbm_increment_cov(const Partition& grid, double hurst) {
  const Index n = grid.size();
  const double p = 2.0 * hurst;
  Matrix c(n, n);
  if (grid.is_uniform()) {
    const double h = grid.T() / static_cast<double>(n);
    const double hp = std::pow(h, p);
    std::vector<double> lag(static_cast<std::size_t>(n));
    for (Index k = 0; k < n; ++k) lag[static_cast<std::size_t>(k)] = 0.5 * hp * second_difference_pow(k, p);
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < n; ++j) c(i, j) = lag[static_cast<std::size_t>(std::abs(i - j))];
    return c;
  }
  auto x = [&](Index i) { return i == 0 ? 0.0 : grid[i - 1]; };
  auto pw = [&](double v) { return std::pow(std::abs(v), p); };
  for (Index i = 1; i <= n; ++i)
    for (Index j = 1; j <= n; ++j)
      c(i - 1, j - 1) = 0.5 * (pw(x(i) - x(j - 1)) + pw(x(i - 1) - x(j)) - pw(x(i) - x(j)) - pw(x(i - 1) - x(j - 1)));
  return c;
}

Matrix ifbm_cell_cov(const Partition& grid, double hurst) {
  const Index n = grid.size();
  const double p1 = 2.0 * hurst + 1.0;
  const double p2 = 2.0 * hurst + 2.0;
  Matrix c(n, n);
  if (grid.is_uniform()) {
    const double h = grid.T() / static_cast<double>(n);
    const double hp1 = std::pow(h, p1);
    const double hp2 = std::pow(h, p2);
    std::vector<double> a(static_cast<std::size_t>(n));
    std::vector<double> lag(static_cast<std::size_t>(n));
    for (Index k = 0; k < n; ++k) {
      a[static_cast<std::size_t>(k)] = h * hp1 * power_increment(k + 1, p1) / p1;
      lag[static_cast<std::size_t>(k)] = hp2 * second_difference_pow(k, p2) / (p1 * p2);
    }
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < n; ++j)
        c(i, j) = 0.5 * (a[static_cast<std::size_t>(i)] + a[static_cast<std::size_t>(j)] -
                         lag[static_cast<std::size_t>(std::abs(i - j))]);
    return c;
  }
  auto x = [&](Index i) { return i == 0 ? 0.0 : grid[i - 1]; };
  auto g = [&](double u) { return std::pow(std::abs(u), p2) / (p1 * p2); };
  std::vector<double> a(static_cast<std::size_t>(n));
  for (Index i = 1; i <= n; ++i) a[static_cast<std::size_t>(i - 1)] = (std::pow(x(i), p1) - std::pow(x(i - 1), p1)) / p1;
  for (Index i = 1; i <= n; ++i) {
    for (Index j = 1; j <= n; ++j) {
      const double lo_i = x(i - 1), hi_i = x(i), lo_j = x(j - 1), hi_j = x(j);
      const double d = g(hi_i - lo_j) + g(lo_i - hi_j) - g(hi_i - hi_j) - g(lo_i - lo_j);
      c(i - 1, j - 1) =
          0.5 * ((hi_j - lo_j) * a[static_cast<std::size_t>(i - 1)] + (hi_i - lo_i) * a[static_cast<std::size_t>(j - 1)] - d);
    }
  }
  return c;
}

PathSampler::PathSampler(ProcessKind process, const Partition& grid, double hurst, double rate)
    : process_(process), grid_(grid), hurst_(hurst), rate_(rate) {
  if ((process == ProcessKind::FBM || process == ProcessKind::IFBM || process == ProcessKind::IIFBM) &&
      !(hurst > 0.0 && hurst < 1.0))
    throw std::invalid_argument("path sampler: hurst must lie in (0, 1)");
  if (process == ProcessKind::OU && !(rate > 0.0)) throw std::invalid_argument("path sampler: OU rate must be positive");
  const bool dense = process == ProcessKind::FBM || process == ProcessKind::IFBM || process == ProcessKind::IIFBM;
  if (dense && grid.size() > 20000) throw std::invalid_argument("path sampler: grid larger than 20000 nodes");
  if (process == ProcessKind::FBM) {
    lower_ = fbm_increment_cov(grid_, hurst_);
    jitter_ = inplace_cholesky(lower_, "fbm sampler");
  } else if (process == ProcessKind::IFBM || process == ProcessKind::IIFBM) {
    lower_ = ifbm_cell_cov(grid_, hurst_);
    jitter_ = inplace_cholesky(lower_, "ifbm sampler");
  }
}

Matrix PathSampler::increments_from_normals(const Matrix& z) const {
  return lower_.triangularView<Eigen::Lower>() * z;
}

Vector PathSampler::sample(RngStream& rng) const {
  std::vector<RngStream> one{rng};
  Vector out = sample(one).col(0);
  rng = one.front();
  return out;
}

Matrix PathSampler::sample(std::vector<RngStream>& streams) const {
  const Index n = grid_.size();
  const Index count = static_cast<Index>(streams.size());
  Matrix out(n, count);
  switch (process_) {
    case ProcessKind::BM: {
      for (Index c = 0; c < count; ++c) {
        double prev = 0.0;
        double acc = 0.0;
        for (Index i = 0; i < n; ++i) {
          acc += std::sqrt(grid_[i] - prev) * streams[static_cast<std::size_t>(c)].normal();
          prev = grid_[i];
          out(i, c) = acc;
        }
      }
      return out;
    }
    case ProcessKind::OU: {
      for (Index c = 0; c < count; ++c) {
        double prev = 0.0;
        double v = 0.0;
        for (Index i = 0; i < n; ++i) {
          const double decay = std::exp(-rate_ * (grid_[i] - prev));
          v = decay * v + std::sqrt(0.25 * (1.0 - decay * decay)) * streams[static_cast<std::size_t>(c)].normal();
          prev = grid_[i];
          out(i, c) = v;
        }
      }
      return out;
    }
    case ProcessKind::PiecewiseJump: {
      for (Index c = 0; c < count; ++c) {
        const double x0 = streams[static_cast<std::size_t>(c)].uniform();
        for (Index i = 0; i < n; ++i) out(i, c) = std::sin(10.0 * grid_[i]) + (grid_[i] > x0 ? 1.0 : 0.0);
      }
      return out;
    }
    case ProcessKind::FBM:
    case ProcessKind::IFBM:
    case ProcessKind::IIFBM:
      break;
  }
  Matrix z(n, count);
  for (Index c = 0; c < count; ++c)
    for (Index i = 0; i < n; ++i) z(i, c) = streams[static_cast<std::size_t>(c)].normal();
  out = increments_from_normals(z);
  cumulative_sum(out);
  if (process_ == ProcessKind::IIFBM) {
    // Trapezoid integration of the integrated path, starting from (0, 0).
    Matrix twice(n, count);
    for (Index c = 0; c < count; ++c) {
      double prev_x = 0.0;
      double prev_f = 0.0;
      double acc = 0.0;
      for (Index i = 0; i < n; ++i) {
        acc += 0.5 * (prev_f + out(i, c)) * (grid_[i] - prev_x);
        prev_x = grid_[i];
        prev_f = out(i, c);
        twice(i, c) = acc;
      }
    }
    return twice;
  }
  return out;
}

Vector sample_path(const PathSamplerSpec& spec) {
  PathSampler sampler(spec.process, spec.grid, spec.hurst, spec.rate);
  RngStream rng(spec.seed, "sample_path");
  return sampler.sample(rng);
}

double bm_bq_mean(const Partition& part, const Vector& f) {
  require_values(part, f);
  double s = 0.0;
  double prev_x = 0.0;
  double prev_f = 0.0;
  for (Index i = 0; i < part.size(); ++i) {
    s += 0.5 * (prev_f + f(i)) * (part[i] - prev_x);
    prev_x = part[i];
    prev_f = f(i);
  }
  return s + prev_f * (part.T() - prev_x);
}

double bm_bq_variance(const Partition& part) {
  double s = 0.0;
  double prev = 0.0;
  for (Index i = 0; i < part.size(); ++i) {
    const double d = part[i] - prev;
    s += d * d * d / 12.0;
    prev = part[i];
  }
  const double tail = part.T() - prev;
  return s + tail * tail * tail / 3.0;
}

double calibration_ratio(const std::vector<double>& squared_errors, const std::vector<double>& tau2_hats,
                         double var_bq) {
  if (squared_errors.empty() || tau2_hats.empty()) throw std::invalid_argument("calibration_ratio: no replicates");
  double se = 0.0;
  for (double v : squared_errors) se += v;
  double th = 0.0;
  for (double v : tau2_hats) th += v;
  se /= static_cast<double>(squared_errors.size());
  th /= static_cast<double>(tau2_hats.size());
  return se / (th * var_bq);
}

CalibRatios calib_ratio_bq(ProcessKind process, double hurst, Index n, Index seeds, std::uint64_t seed, double T) {
  if (seeds < 1) throw std::invalid_argument("calib_ratio_bq: need at least one seed");
  constexpr Index kRefine = 16;
  const Partition fine = Partition::uniform(T, kRefine * n);
  const Partition coarse = Partition::uniform(T, n);
  const PathSampler sampler(process, fine, hurst);
  RngStream root(seed, "calib_ratio");
  std::vector<RngStream> streams;
  for (Index r = 0; r < seeds; ++r) streams.push_back(root.split("path", static_cast<std::uint64_t>(r)));
  const Matrix paths = sampler.sample(streams);

  std::vector<double> sq, cv, ml, icv;
  for (Index r = 0; r < seeds; ++r) {
    const Vector path = paths.col(r);
    const double truth = bm_bq_mean(fine, path);
    Vector f(n);
    for (Index i = 0; i < n; ++i) f(i) = path(kRefine * (i + 1) - 1);
    const double err = truth - bm_bq_mean(coarse, f);
    sq.push_back(err * err);
    cv.push_back(cv_estimate(coarse, f).value);
    ml.push_back(ml_estimate(coarse, f).value);
    icv.push_back(icv_estimate(coarse, f).value);
  }
  CalibRatios out;
  out.var_bq = bm_bq_variance(coarse);
  out.r_cv = calibration_ratio(sq, cv, out.var_bq);
  out.r_ml = calibration_ratio(sq, ml, out.var_bq);
  out.r_icv = calibration_ratio(sq, icv, out.var_bq);
  double m = 0.0;
  for (double v : sq) m += v;
  out.mean_squared_error = m / static_cast<double>(sq.size());
  return out;
}

}  // namespace kdisc

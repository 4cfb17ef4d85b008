#include "kdisc/kernels.hpp"

#include "kdisc/rng.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace kdisc {

KernelSpec KernelSpec::gaussian(double tau2, double lengthscale) {
  KernelSpec s;
  s.family = KernelFamily::Gaussian;
  s.tau2 = tau2;
  s.lengthscale = lengthscale;
  s.validate();
  return s;
}

KernelSpec KernelSpec::matern(MaternOrder nu, double tau2, double lengthscale) {
  KernelSpec s;
  s.family = KernelFamily::Matern;
  s.nu = nu;
  s.tau2 = tau2;
  s.lengthscale = lengthscale;
  s.validate();
  return s;
}

KernelSpec KernelSpec::brownian(double tau2) {
  KernelSpec s;
  s.family = KernelFamily::Brownian;
  s.tau2 = tau2;
  s.validate();
  return s;
}

KernelSpec KernelSpec::fbm(double hurst, double tau2) {
  KernelSpec s;
  s.family = KernelFamily::FBM;
  s.hurst = hurst;
  s.tau2 = tau2;
  s.validate();
  return s;
}

KernelSpec KernelSpec::ifbm(double hurst, double tau2) {
  KernelSpec s;
  s.family = KernelFamily::IFBM;
  s.hurst = hurst;
  s.tau2 = tau2;
  s.validate();
  return s;
}

KernelSpec KernelSpec::polynomial(int degree, double offset, double tau2) {
  KernelSpec s;
  s.family = KernelFamily::Polynomial;
  s.degree = degree;
  s.offset = offset;
  s.tau2 = tau2;
  s.validate();
  return s;
}

KernelSpec KernelSpec::linear(double tau2) {
  KernelSpec s;
  s.family = KernelFamily::Linear;
  s.tau2 = tau2;
  s.validate();
  return s;
}

KernelSpec KernelSpec::ornstein_uhlenbeck(double rate, double tau2) {
  KernelSpec s;
  s.family = KernelFamily::OrnsteinUhlenbeck;
  s.rate = rate;
  s.tau2 = tau2;
  s.validate();
  return s;
}

void KernelSpec::validate() const {
  if (!(tau2 > 0.0) || !std::isfinite(tau2)) throw std::invalid_argument("kernel: tau2 must be positive");
  if (uses_lengthscale() && (!(lengthscale > 0.0) || !std::isfinite(lengthscale)))
    throw std::invalid_argument("kernel: lengthscale must be positive");
  if ((family == KernelFamily::FBM || family == KernelFamily::IFBM) && !(hurst > 0.0 && hurst < 1.0))
    throw std::invalid_argument("kernel: hurst must lie in (0, 1)");
  if (family == KernelFamily::Polynomial) {
    if (degree < 0) throw std::invalid_argument("kernel: polynomial degree must be >= 0");
    if (!(offset >= 0.0)) throw std::invalid_argument("kernel: polynomial offset must be >= 0");
  }
  if (family == KernelFamily::OrnsteinUhlenbeck && !(rate > 0.0))
    throw std::invalid_argument("kernel: OU rate must be positive");
}

bool KernelSpec::scalar_domain() const noexcept {
  return family == KernelFamily::Brownian || family == KernelFamily::FBM ||
         family == KernelFamily::IFBM || family == KernelFamily::OrnsteinUhlenbeck;
}

bool KernelSpec::uses_lengthscale() const noexcept {
  return family == KernelFamily::Gaussian || family == KernelFamily::Matern;
}

KernelSpec KernelSpec::with_amplitude(double new_tau2) const {
  KernelSpec s = *this;
  s.tau2 = new_tau2;
  s.validate();
  return s;
}

KernelSpec KernelSpec::with_lengthscale(double new_lengthscale) const {
  KernelSpec s = *this;
  s.lengthscale = new_lengthscale;
  s.validate();
  return s;
}

std::string KernelSpec::name() const {
  switch (family) {
    case KernelFamily::Gaussian: return "gaussian";
    case KernelFamily::Matern: return "matern";
    case KernelFamily::Brownian: return "brownian";
    case KernelFamily::FBM: return "fbm";
    case KernelFamily::IFBM: return "ifbm";
    case KernelFamily::Polynomial: return "polynomial";
    case KernelFamily::Linear: return "linear";
    case KernelFamily::OrnsteinUhlenbeck: return "ou";
  }
  return "unknown";
}

void check_domain(const KernelSpec& spec, PointView x) {
  if (!spec.scalar_domain()) return;
  if (x.size() != 1) throw ShapeError(spec.name() + " kernel requires scalar inputs");
  if (x[0] < 0.0) throw DomainError(spec.name() + " kernel requires inputs >= 0");
}

void check_domain(const KernelSpec& spec, const PointSet& points) {
  if (!spec.scalar_domain()) return;
  if (points.cols() != 1) throw ShapeError(spec.name() + " kernel requires scalar inputs");
  if (points.rows() > 0 && points.col(0).minCoeff() < 0.0)
    throw DomainError(spec.name() + " kernel requires inputs >= 0");
}

double eval(const KernelSpec& spec, PointView x, PointView y) {
  if (x.size() != y.size()) throw ShapeError("eval: dimension mismatch");
  check_domain(spec, x);
  check_domain(spec, y);
  return visit_kernel(spec, [&](const auto& k) {
    return k(x.data(), y.data(), static_cast<Index>(x.size()));
  });
}

Matrix gram(const KernelSpec& spec, const PointSet& points) {
  check_domain(spec, points);
  const Index n = points.rows();
  const Index d = points.cols();
  Matrix out(n, n);
  visit_kernel(spec, [&](const auto& k) {
#pragma omp parallel for schedule(dynamic, 16)
    for (Index i = 0; i < n; ++i) {
      const double* xi = points.row(i).data();
      for (Index j = 0; j <= i; ++j) out(i, j) = k(xi, points.row(j).data(), d);
    }
    return 0;
  });
  out.triangularView<Eigen::StrictlyUpper>() = out.transpose();
  return out;
}

Matrix cross_gram(const KernelSpec& spec, const PointSet& a, const PointSet& b) {
  if (a.rows() > 0 && b.rows() > 0 && a.cols() != b.cols()) throw ShapeError("cross_gram: dimension mismatch");
  check_domain(spec, a);
  check_domain(spec, b);
  const Index n = a.rows();
  const Index m = b.rows();
  const Index d = a.cols();
  Matrix out(n, m);
  visit_kernel(spec, [&](const auto& k) {
#pragma omp parallel for schedule(static)
    for (Index i = 0; i < n; ++i) {
      const double* ai = a.row(i).data();
      for (Index j = 0; j < m; ++j) out(i, j) = k(ai, b.row(j).data(), d);
    }
    return 0;
  });
  return out;
}

Vector kernel_row(const KernelSpec& spec, PointView x, const PointSet& b) {
  if (b.rows() > 0 && static_cast<Index>(x.size()) != b.cols()) throw ShapeError("kernel_row: dimension mismatch");
  check_domain(spec, x);
  check_domain(spec, b);
  const Index m = b.rows();
  const Index d = b.cols();
  Vector out(m);
  visit_kernel(spec, [&](const auto& k) {
    for (Index j = 0; j < m; ++j) out(j) = k(x.data(), b.row(j).data(), d);
    return 0;
  });
  return out;
}

namespace reference {

Matrix gram(const KernelSpec& spec, const PointSet& points) {
  const Index n = points.rows();
  Matrix out(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) out(i, j) = eval(spec, point(points, i), point(points, j));
  return out;
}

Matrix cross_gram(const KernelSpec& spec, const PointSet& a, const PointSet& b) {
  Matrix out(a.rows(), b.rows());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < b.rows(); ++j) out(i, j) = eval(spec, point(a, i), point(b, j));
  return out;
}

}  // namespace reference

double median_heuristic(const PointSet& pooled, std::uint64_t seed) {
  if (pooled.rows() < 2) throw std::invalid_argument("median_heuristic: need at least two points");
  constexpr Index kMaxPoints = 1000;
  const PointSet* src = &pooled;
  PointSet sub;
  if (pooled.rows() > kMaxPoints) {
    RngStream rng(seed, "median_heuristic");
    const auto perm = rng.permutation(static_cast<std::size_t>(pooled.rows()));
    sub.resize(kMaxPoints, pooled.cols());
    for (Index i = 0; i < kMaxPoints; ++i) sub.row(i) = pooled.row(static_cast<Index>(perm[i]));
    src = &sub;
  }
  const Index n = src->rows();
  const Index d = src->cols();
  std::vector<double> dists;
  dists.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j)
      dists.push_back(std::sqrt(detail::sqdist(src->row(i).data(), src->row(j).data(), d)));
  const std::size_t m = dists.size();
  const std::size_t mid = m / 2;
  std::nth_element(dists.begin(), dists.begin() + static_cast<std::ptrdiff_t>(mid), dists.end());
  double med = dists[mid];
  if (m % 2 == 0) {
    const double lower = *std::max_element(dists.begin(), dists.begin() + static_cast<std::ptrdiff_t>(mid));
    med = 0.5 * (med + lower);
  }
  if (!(med > 0.0)) throw std::invalid_argument("median_heuristic: median pairwise distance is zero");
  return med;
}

namespace {

std::string fmt(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

double parse_double(const std::string& key, const std::string& text) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size())
    throw std::invalid_argument("kernel config: bad number for '" + key + "': " + text);
  return v;
}

}  // namespace

std::map<std::string, std::string> to_config(const KernelSpec& spec) {
  std::map<std::string, std::string> out;
  out["family"] = spec.name();
  out["tau2"] = fmt(spec.tau2);
  switch (spec.family) {
    case KernelFamily::Gaussian:
      out["lengthscale"] = fmt(spec.lengthscale);
      break;
    case KernelFamily::Matern:
      out["lengthscale"] = fmt(spec.lengthscale);
      out["nu"] = spec.nu == MaternOrder::Half ? "0.5" : spec.nu == MaternOrder::ThreeHalves ? "1.5" : "2.5";
      break;
    case KernelFamily::FBM:
    case KernelFamily::IFBM:
      out["hurst"] = fmt(spec.hurst);
      break;
    case KernelFamily::Polynomial:
      out["degree"] = std::to_string(spec.degree);
      out["offset"] = fmt(spec.offset);
      break;
    case KernelFamily::OrnsteinUhlenbeck:
      out["lambda"] = fmt(spec.rate);
      break;
    case KernelFamily::Brownian:
    case KernelFamily::Linear:
      break;
  }
  return out;
}

KernelSpec kernel_from_config(const std::map<std::string, std::string>& cfg) {
  static const char* known[] = {"family", "tau2", "lengthscale", "nu", "hurst", "degree", "offset", "lambda"};
  for (const auto& [key, value] : cfg) {
    if (std::find_if(std::begin(known), std::end(known), [&](const char* k) { return key == k; }) == std::end(known))
      throw std::invalid_argument("kernel config: unknown key '" + key + "'");
  }
  auto get = [&](const char* key, double fallback) {
    auto it = cfg.find(key);
    return it == cfg.end() ? fallback : parse_double(key, it->second);
  };
  auto fam = cfg.find("family");
  if (fam == cfg.end()) throw std::invalid_argument("kernel config: missing 'family'");

  KernelSpec s;
  const std::string& f = fam->second;
  if (f == "gaussian") s.family = KernelFamily::Gaussian;
  else if (f == "matern") s.family = KernelFamily::Matern;
  else if (f == "brownian") s.family = KernelFamily::Brownian;
  else if (f == "fbm") s.family = KernelFamily::FBM;
  else if (f == "ifbm") s.family = KernelFamily::IFBM;
  else if (f == "polynomial") s.family = KernelFamily::Polynomial;
  else if (f == "linear") s.family = KernelFamily::Linear;
  else if (f == "ou") s.family = KernelFamily::OrnsteinUhlenbeck;
  else throw std::invalid_argument("kernel config: unknown family '" + f + "'");

  s.tau2 = get("tau2", 1.0);
  s.lengthscale = get("lengthscale", 1.0);
  s.hurst = get("hurst", 0.5);
  s.offset = get("offset", 0.0);
  s.rate = get("lambda", 1.0);
  const double degree = get("degree", 1.0);
  if (degree != std::floor(degree)) throw std::invalid_argument("kernel config: degree must be an integer");
  s.degree = static_cast<int>(degree);
  const double nu = get("nu", 2.5);
  if (nu == 0.5) s.nu = MaternOrder::Half;
  else if (nu == 1.5) s.nu = MaternOrder::ThreeHalves;
  else if (nu == 2.5) s.nu = MaternOrder::FiveHalves;
  else throw std::invalid_argument("kernel config: nu must be 0.5, 1.5 or 2.5");
  s.validate();
  return s;
}

}  // namespace kdisc

#pragma once

#include "kdisc/types.hpp"

#include <cmath>
#include <cstdint>
#include <map>
#include <string>

namespace kdisc {

enum class KernelFamily { Gaussian, Matern, Brownian, FBM, IFBM, Polynomial, Linear, OrnsteinUhlenbeck };

enum class MaternOrder { Half, ThreeHalves, FiveHalves };

struct KernelSpec {
  KernelFamily family = KernelFamily::Gaussian;
  double tau2 = 1.0;
  double lengthscale = 1.0;
  MaternOrder nu = MaternOrder::FiveHalves;
  double hurst = 0.5;
  int degree = 1;
  double offset = 0.0;
  double rate = 1.0;

  static KernelSpec gaussian(double tau2, double lengthscale);
  static KernelSpec matern(MaternOrder nu, double tau2, double lengthscale);
  static KernelSpec brownian(double tau2 = 1.0);
  static KernelSpec fbm(double hurst, double tau2 = 1.0);
  static KernelSpec ifbm(double hurst, double tau2 = 1.0);
  static KernelSpec polynomial(int degree, double offset, double tau2 = 1.0);
  static KernelSpec linear(double tau2 = 1.0);
  static KernelSpec ornstein_uhlenbeck(double rate, double tau2 = 1.0);

  // Throws std::invalid_argument on out-of-range parameters.
  void validate() const;

  // Brownian, FBM, IFBM and OU live on [0, inf) and take scalar inputs.
  bool scalar_domain() const noexcept;
  bool uses_lengthscale() const noexcept;

  KernelSpec with_amplitude(double new_tau2) const;
  KernelSpec with_lengthscale(double new_lengthscale) const;

  std::string name() const;
};

namespace detail {

inline double sqdist(const double* x, const double* y, Index d) noexcept {
  double s = 0.0;
  for (Index i = 0; i < d; ++i) {
    const double t = x[i] - y[i];
    s += t * t;
  }
  return s;
}

inline double dot(const double* x, const double* y, Index d) noexcept {
  double s = 0.0;
  for (Index i = 0; i < d; ++i) s += x[i] * y[i];
  return s;
}

struct GaussianK {
  double tau2, neg_half_inv_l2;
  double operator()(const double* x, const double* y, Index d) const noexcept {
    return tau2 * std::exp(neg_half_inv_l2 * sqdist(x, y, d));
  }
};

struct Matern12K {
  double tau2, inv_l;
  double operator()(const double* x, const double* y, Index d) const noexcept {
    return tau2 * std::exp(-std::sqrt(sqdist(x, y, d)) * inv_l);
  }
};

struct Matern32K {
  double tau2, inv_l;
  double operator()(const double* x, const double* y, Index d) const noexcept {
    const double r = std::sqrt(3.0 * sqdist(x, y, d)) * inv_l;
    return tau2 * ((1.0 + r) * std::exp(-r));
  }
};

struct Matern52K {
  double tau2, inv_l;
  double operator()(const double* x, const double* y, Index d) const noexcept {
    const double r = std::sqrt(5.0 * sqdist(x, y, d)) * inv_l;
    return tau2 * ((1.0 + r + r * r / 3.0) * std::exp(-r));
  }
};

struct BrownianK {
  double tau2;
  double operator()(const double* x, const double* y, Index) const noexcept {
    return tau2 * std::min(x[0], y[0]);
  }
};

struct FbmK {
  double tau2, two_h;
  double operator()(const double* x, const double* y, Index) const noexcept {
    const double a = x[0], b = y[0];
    return tau2 *
           (0.5 * (std::pow(a, two_h) + std::pow(b, two_h) - std::pow(std::abs(a - b), two_h)));
  }
};

struct IfbmK {
  double tau2, h;
  double operator()(const double* x, const double* y, Index) const noexcept {
    const double a = x[0], b = y[0];
    const double p1 = 2.0 * h + 1.0;
    const double p2 = 2.0 * h + 2.0;
    const double cross = b * std::pow(a, p1) + a * std::pow(b, p1);
    const double tail =
        (std::pow(a, p2) + std::pow(b, p2) - std::pow(std::abs(a - b), p2)) / (2.0 * (h + 1.0));
    return tau2 * ((cross - tail) / (2.0 * p1));
  }
};

struct PolynomialK {
  double tau2, offset;
  int degree;
  double operator()(const double* x, const double* y, Index d) const noexcept {
    const double base = dot(x, y, d) + offset;
    double out = 1.0;
    for (int i = 0; i < degree; ++i) out *= base;
    return tau2 * out;
  }
};

struct LinearK {
  double tau2;
  double operator()(const double* x, const double* y, Index d) const noexcept {
    return tau2 * dot(x, y, d);
  }
};

struct OuK {
  double tau2, rate;
  double operator()(const double* x, const double* y, Index) const noexcept {
    const double a = x[0], b = y[0];
    return tau2 * (0.25 * (std::exp(-rate * std::abs(a - b)) - std::exp(-rate * (a + b))));
  }
};

}  // namespace detail

// Calls f with a concrete kernel functor so hot loops inline the evaluation.
template <class F>
decltype(auto) visit_kernel(const KernelSpec& s, F&& f) {
  switch (s.family) {
    case KernelFamily::Gaussian:
      return f(detail::GaussianK{s.tau2, -0.5 / (s.lengthscale * s.lengthscale)});
    case KernelFamily::Matern:
      switch (s.nu) {
        case MaternOrder::Half:
          return f(detail::Matern12K{s.tau2, 1.0 / s.lengthscale});
        case MaternOrder::ThreeHalves:
          return f(detail::Matern32K{s.tau2, 1.0 / s.lengthscale});
        case MaternOrder::FiveHalves:
          break;
      }
      return f(detail::Matern52K{s.tau2, 1.0 / s.lengthscale});
    case KernelFamily::Brownian:
      return f(detail::BrownianK{s.tau2});
    case KernelFamily::FBM:
      return f(detail::FbmK{s.tau2, 2.0 * s.hurst});
    case KernelFamily::IFBM:
      return f(detail::IfbmK{s.tau2, s.hurst});
    case KernelFamily::Polynomial:
      return f(detail::PolynomialK{s.tau2, s.offset, s.degree});
    case KernelFamily::Linear:
      return f(detail::LinearK{s.tau2});
    case KernelFamily::OrnsteinUhlenbeck:
      break;
  }
  return f(detail::OuK{s.tau2, s.rate});
}

// Checks the input-domain requirements of the spec against a point set.
void check_domain(const KernelSpec& spec, const PointSet& points);
void check_domain(const KernelSpec& spec, PointView x);

double eval(const KernelSpec& spec, PointView x, PointView y);

// Gram matrix, OpenMP-parallel over rows.
Matrix gram(const KernelSpec& spec, const PointSet& points);
// Rectangular matrix with entries k(a_i, b_j).
Matrix cross_gram(const KernelSpec& spec, const PointSet& a, const PointSet& b);
// k(x, b_j) for every row of b.
Vector kernel_row(const KernelSpec& spec, PointView x, const PointSet& b);

namespace reference {
// Serial double loops with the generic eval, kept as oracles for the parallel paths.
Matrix gram(const KernelSpec& spec, const PointSet& points);
Matrix cross_gram(const KernelSpec& spec, const PointSet& a, const PointSet& b);
}  // namespace reference

// Median pairwise Euclidean distance. Above 1000 points a seeded subsample
// of 1000 rows is used.
double median_heuristic(const PointSet& pooled, std::uint64_t seed = 0);

std::map<std::string, std::string> to_config(const KernelSpec& spec);
KernelSpec kernel_from_config(const std::map<std::string, std::string>& cfg);

}  // namespace kdisc

#pragma once

#include <Eigen/Dense>

#include <span>
#include <stdexcept>
#include <string>

namespace kdisc {

/// Point sets are stored one point per row, row-major, so that each point is a
/// contiguous span of `cols()` doubles.
using PointSet = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

using PointView = std::span<const double>;

inline PointView point(const PointSet& points, Index i) {
  return {points.row(i).data(), static_cast<std::size_t>(points.cols())};
}

/// Builds an N x 1 point set from scalar values.
inline PointSet column(std::span<const double> values) {
  PointSet out(static_cast<Index>(values.size()), 1);
  for (std::size_t i = 0; i < values.size(); ++i) out(static_cast<Index>(i), 0) = values[i];
  return out;
}

inline PointSet column(const Vector& values) {
  return column(std::span<const double>(values.data(), static_cast<std::size_t>(values.size())));
}

/// Stacks two point sets with equal dimension.
inline PointSet stack(const PointSet& top, const PointSet& bottom) {
  if (top.rows() > 0 && bottom.rows() > 0 && top.cols() != bottom.cols())
    throw std::invalid_argument("stack: dimension mismatch");
  PointSet out(top.rows() + bottom.rows(), top.rows() > 0 ? top.cols() : bottom.cols());
  if (top.rows() > 0) out.topRows(top.rows()) = top;
  if (bottom.rows() > 0) out.bottomRows(bottom.rows()) = bottom;
  return out;
}

// Error hierarchy. Everything derives from std::runtime_error or
// std::invalid_argument so callers can catch broadly.

class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class SingularMatrixError : public std::runtime_error {
 public:
  SingularMatrixError(const std::string& what, double condition_estimate)
      : std::runtime_error(what), condition_estimate_(condition_estimate) {}
  double condition_estimate() const noexcept { return condition_estimate_; }

 private:
  double condition_estimate_;
};

class UnsupportedEmbeddingError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace kdisc

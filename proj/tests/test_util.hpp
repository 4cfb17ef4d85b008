#pragma once

#include "kdisc/rng.hpp"
#include "kdisc/types.hpp"

#include <algorithm>
#include <vector>

namespace kdisc::testutil {

inline PointSet random_points(RngStream& rng, Index n, Index d, double lo = -2.0, double hi = 2.0) {
  PointSet out(n, d);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < d; ++j) out(i, j) = lo + (hi - lo) * rng.uniform();
  return out;
}

// Sorted positive nodes in (0, T] from random increments whose sizes differ by
// at most a factor of ten, so no two nodes nearly coincide.
inline std::vector<double> random_partition(RngStream& rng, Index n, double T) {
  std::vector<double> x;
  double acc = 0.0;
  for (Index i = 0; i <= n; ++i) {
    acc += 0.1 + 0.9 * rng.uniform();
    x.push_back(acc);
  }
  const double total = x.back();
  x.pop_back();
  for (double& v : x) v *= T / total;
  return x;
}

inline Vector random_vector(RngStream& rng, Index n) {
  Vector v(n);
  for (Index i = 0; i < n; ++i) v(i) = rng.normal();
  return v;
}

}  // namespace kdisc::testutil

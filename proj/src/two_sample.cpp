#include "kdisc/two_sample.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <memory>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace kdisc {

void TestConfig::validate() const {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("test config: alpha must be in (0, 1)");
  if (permutations < 1) throw std::invalid_argument("test config: need at least one permutation");
}

namespace {

PointSet gather(const PointSet& pooled, std::span<const Index> idx) {
  PointSet out(static_cast<Index>(idx.size()), pooled.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Index>(i)) = pooled.row(idx[i]);
  return out;
}

}  // namespace

StatisticBuilder wrap_statistic(Statistic statistic) {
  return [statistic = std::move(statistic)](const PointSet& pooled, Index, std::uint64_t) -> SplitStatistic {
    auto shared = std::make_shared<const PointSet>(pooled);
    return [statistic, shared](std::span<const Index> p_idx, std::span<const Index> q_idx) {
      return statistic(gather(*shared, p_idx), gather(*shared, q_idx));
    };
  };
}

double permutation_threshold(std::vector<double> null_samples, double alpha) {
  if (null_samples.empty()) throw std::invalid_argument("permutation_threshold: no null samples");
  const auto b = static_cast<double>(null_samples.size());
  auto rank = static_cast<std::size_t>(std::ceil((1.0 - alpha) * b - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, null_samples.size());
  std::nth_element(null_samples.begin(), null_samples.begin() + static_cast<std::ptrdiff_t>(rank - 1),
                   null_samples.end());
  return null_samples[rank - 1];
}

TestResult permutation_test(const StatisticBuilder& builder, const PointSet& p, const PointSet& q,
                            const TestConfig& cfg) {
  cfg.validate();
  const PointSet pooled = stack(p, q);
  const Index n_p = p.rows();
  const Index total = pooled.rows();
  const SplitStatistic statistic = builder(pooled, n_p, derive_seed(cfg.seed, "statistic"));

  std::vector<Index> identity(static_cast<std::size_t>(total));
  std::iota(identity.begin(), identity.end(), Index{0});
  TestResult out;
  out.statistic = statistic(std::span<const Index>(identity.data(), static_cast<std::size_t>(n_p)),
                            std::span<const Index>(identity.data() + n_p, static_cast<std::size_t>(total - n_p)));

  const RngStream root(cfg.seed, "permutation");
  const Index b_count = cfg.permutations;
  out.null_samples.assign(static_cast<std::size_t>(b_count), 0.0);
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(b_count));
#pragma omp parallel for schedule(dynamic, 4)
  for (Index b = 0; b < b_count; ++b) {
    try {
      RngStream rng = root.split("perm", static_cast<std::uint64_t>(b));
      const auto perm = rng.permutation(static_cast<std::size_t>(total));
      std::vector<Index> idx(perm.begin(), perm.end());
      out.null_samples[static_cast<std::size_t>(b)] =
          statistic(std::span<const Index>(idx.data(), static_cast<std::size_t>(n_p)),
                    std::span<const Index>(idx.data() + n_p, static_cast<std::size_t>(total - n_p)));
    } catch (...) {
      errors[static_cast<std::size_t>(b)] = std::current_exception();
    }
  }
  for (std::size_t b = 0; b < errors.size(); ++b) {
    if (!errors[b]) continue;
    try {
      std::rethrow_exception(errors[b]);
    } catch (const std::exception& e) {
      std::ostringstream msg;
      msg << "permutation_test: statistic failed on permutation " << b << ": " << e.what();
      throw std::runtime_error(msg.str());
    }
  }
  out.threshold = permutation_threshold(out.null_samples, cfg.alpha);
  out.reject = out.statistic > out.threshold;
  return out;
}

TestResult permutation_test(const Statistic& statistic, const PointSet& p, const PointSet& q, const TestConfig& cfg) {
  return permutation_test(wrap_statistic(statistic), p, q, cfg);
}

std::vector<double> rejection_rates(const std::vector<StatisticBuilder>& builders, const SampleGenerator& gen_p,
                                    const SampleGenerator& gen_q, Index n, Index reps, const TestConfig& cfg) {
  cfg.validate();
  if (reps < 1) throw std::invalid_argument("rejection_rates: need at least one repetition");
  const RngStream base(cfg.seed, "rejection_rate");
  std::vector<Index> rejects(builders.size(), 0);
  for (Index r = 0; r < reps; ++r) {
    RngStream rp = base.split("P", static_cast<std::uint64_t>(r));
    RngStream rq = base.split("Q", static_cast<std::uint64_t>(r));
    const PointSet p = gen_p(rp, n);
    const PointSet q = gen_q(rq, n);
    TestConfig rep_cfg = cfg;
    rep_cfg.seed = base.split("test", static_cast<std::uint64_t>(r)).seed();
    for (std::size_t s = 0; s < builders.size(); ++s)
      if (permutation_test(builders[s], p, q, rep_cfg).reject) ++rejects[s];
  }
  std::vector<double> out;
  for (Index c : rejects) out.push_back(static_cast<double>(c) / static_cast<double>(reps));
  return out;
}

double rejection_rate(const StatisticBuilder& builder, const SampleGenerator& gen_p, const SampleGenerator& gen_q,
                      Index n, Index reps, const TestConfig& cfg) {
  return rejection_rates({builder}, gen_p, gen_q, n, reps, cfg).front();
}

namespace {

KernelSpec resolve_bandwidth(const KernelSpec& spec, Bandwidth bandwidth, const PointSet& pooled,
                             std::uint64_t seed) {
  if (bandwidth == Bandwidth::Fixed || !spec.uses_lengthscale()) return spec;
  return spec.with_lengthscale(median_heuristic(pooled, seed));
}

// Sum over index pairs through a kernel accessor kf(i, j).
template <class K>
double pair_sum(const K& kf, std::span<const Index> a, std::span<const Index> b) {
  double s = 0.0;
  for (Index i : a)
    for (Index j : b) s += kf(i, j);
  return s;
}

template <class K>
double self_sum(const K& kf, std::span<const Index> a, bool include_diagonal) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < i; ++j) row += kf(a[i], a[j]);
    s += 2.0 * row;
    if (include_diagonal) s += kf(a[i], a[i]);
  }
  return s;
}

template <class K>
double split_mmd(const K& kf, const MmdStatisticOptions& opts, std::span<const Index> p, std::span<const Index> q) {
  const auto n = static_cast<double>(p.size());
  const auto m = static_cast<double>(q.size());
  switch (opts.kind) {
    case EstimatorKind::V:
      return self_sum(kf, p, true) / (n * n) + self_sum(kf, q, true) / (m * m) - 2.0 * pair_sum(kf, p, q) / (n * m);
    case EstimatorKind::U:
      return self_sum(kf, p, false) / (n * (n - 1.0)) + self_sum(kf, q, false) / (m * (m - 1.0)) -
             2.0 * pair_sum(kf, p, q) / (n * m);
    case EstimatorKind::Linear: {
      const std::size_t blocks = p.size() / 2;
      double s = 0.0;
      for (std::size_t b = 0; b < blocks; ++b) {
        const Index x1 = p[2 * b], x2 = p[2 * b + 1], y1 = q[2 * b], y2 = q[2 * b + 1];
        s += kf(x1, x2) + kf(y1, y2) - kf(x1, y2) - kf(x2, y1);
      }
      return s / static_cast<double>(blocks);
    }
    case EstimatorKind::Multi: {
      const auto len = static_cast<Index>(p.size());
      const Index r_max = opts.subdiagonals;
      double s = 0.0;
      for (Index r = 1; r <= r_max; ++r)
        for (Index i = 0; i + r < len; ++i) {
          const Index xi = p[static_cast<std::size_t>(i)], xr = p[static_cast<std::size_t>(i + r)];
          const Index yi = q[static_cast<std::size_t>(i)], yr = q[static_cast<std::size_t>(i + r)];
          s += kf(xi, xr) + kf(yi, yr) - kf(xi, yr) - kf(xr, yi);
        }
      const auto rr = static_cast<double>(r_max);
      return 2.0 / (rr * (2.0 * static_cast<double>(len) - rr - 1.0)) * s;
    }
    default:
      throw std::invalid_argument("mmd_statistic: unsupported estimator kind");
  }
}

double split_features(const Matrix& phi, EstimatorKind kind, std::span<const Index> p, std::span<const Index> q) {
  const auto n = static_cast<double>(p.size());
  const auto m = static_cast<double>(q.size());
  Vector sp = Vector::Zero(phi.cols());
  Vector sq = Vector::Zero(phi.cols());
  double dp = 0.0, dq = 0.0;
  for (Index i : p) {
    sp += phi.row(i).transpose();
    dp += phi.row(i).squaredNorm();
  }
  for (Index i : q) {
    sq += phi.row(i).transpose();
    dq += phi.row(i).squaredNorm();
  }
  if (kind == EstimatorKind::V) return (sp / n - sq / m).squaredNorm();
  return (sp.squaredNorm() - dp) / (n * (n - 1.0)) + (sq.squaredNorm() - dq) / (m * (m - 1.0)) -
         2.0 * sp.dot(sq) / (n * m);
}

void check_split_sizes(const MmdStatisticOptions& opts, Index n_p, Index n_q) {
  if (opts.kind == EstimatorKind::U && (n_p < 2 || n_q < 2))
    throw ShapeError("mmd_statistic: U-statistic needs two points per sample");
  if ((opts.kind == EstimatorKind::Linear || opts.kind == EstimatorKind::Multi) && n_p != n_q)
    throw ShapeError("mmd_statistic: linear and multi estimators need equal sample sizes");
  if (opts.kind == EstimatorKind::Linear && n_p < 2) throw ShapeError("mmd_statistic: need two points per sample");
  if (opts.kind == EstimatorKind::Multi && (opts.subdiagonals < 1 || opts.subdiagonals > n_p - 1))
    throw std::invalid_argument("mmd_statistic: subdiagonal count must be in [1, N-1]");
}

}  // namespace

StatisticBuilder mmd_statistic(const KernelSpec& spec, const MmdStatisticOptions& opts) {
  if (opts.kind != EstimatorKind::V && opts.kind != EstimatorKind::U && opts.kind != EstimatorKind::Linear &&
      opts.kind != EstimatorKind::Multi)
    throw std::invalid_argument("mmd_statistic: estimator must be V, U, Linear or Multi");
  return [spec, opts](const PointSet& pooled, Index n_p, std::uint64_t seed) -> SplitStatistic {
    check_split_sizes(opts, n_p, pooled.rows() - n_p);
    const KernelSpec k = resolve_bandwidth(spec, opts.bandwidth, pooled, seed);
    if (opts.kind == EstimatorKind::V || opts.kind == EstimatorKind::U) {
      if (auto phi = feature_map(k, pooled)) {
        auto shared = std::make_shared<const Matrix>(std::move(*phi));
        const EstimatorKind kind = opts.kind;
        return [shared, kind](std::span<const Index> p, std::span<const Index> q) {
          return split_features(*shared, kind, p, q);
        };
      }
    }
    if (pooled.rows() <= opts.gram_cache_limit) {
      auto g = std::make_shared<const Matrix>(gram(k, pooled));
      return [g, opts](std::span<const Index> p, std::span<const Index> q) {
        const Matrix& gm = *g;
        return split_mmd([&gm](Index i, Index j) { return gm(i, j); }, opts, p, q);
      };
    }
    auto shared = std::make_shared<const PointSet>(pooled);
    return [shared, k, opts](std::span<const Index> p, std::span<const Index> q) {
      const PointSet& pts = *shared;
      const Index d = pts.cols();
      return visit_kernel(k, [&](const auto& kern) {
        return split_mmd([&](Index i, Index j) { return kern(pts.row(i).data(), pts.row(j).data(), d); }, opts, p, q);
      });
    };
  };
}

StatisticBuilder kqd_statistic(const KernelSpec& spec, const KqdStatisticOptions& opts) {
  if (opts.kind != EstimatorKind::EKQD && opts.kind != EstimatorKind::SupKQD &&
      opts.kind != EstimatorKind::CenteredEKQD)
    throw std::invalid_argument("kqd_statistic: estimator must be EKQD, SupKQD or CenteredEKQD");
  if (opts.kind == EstimatorKind::CenteredEKQD && opts.p != 2)
    throw std::invalid_argument("kqd_statistic: centered e-KQD requires p = 2");
  return [spec, opts](const PointSet& pooled, Index n_p, std::uint64_t seed) -> SplitStatistic {
    if (pooled.rows() - n_p != n_p) throw ShapeError("kqd_statistic: samples must have equal size");
    const KernelSpec k = resolve_bandwidth(spec, opts.bandwidth, pooled, derive_seed(seed, "bandwidth"));
    KqdConfig cfg = KqdConfig::log_scaled(n_p, opts.p, derive_seed(seed, "directions"));
    if (opts.directions > 0) cfg.directions = opts.directions;
    if (opts.anchors > 0) cfg.anchors = opts.anchors;
    const auto dirs = sample_directions(k, cfg, pooled);
    auto proj = std::make_shared<const Matrix>(project(dirs, pooled));

    SplitStatistic mmd_part;
    if (opts.kind == EstimatorKind::CenteredEKQD) {
      MmdStatisticOptions mo;
      mo.kind = EstimatorKind::U;
      mmd_part = mmd_statistic(k, mo)(pooled, n_p, seed);
    }
    const auto kind = opts.kind;
    const int power = opts.p;
    const QuantileWeighting nu = opts.nu;
    return [proj, mmd_part, kind, power, nu](std::span<const Index> p, std::span<const Index> q) {
      const Matrix& pr = *proj;
      const Index l_count = pr.rows();
      std::vector<double> a(p.size()), b(q.size());
      double sum = 0.0;
      double best = -std::numeric_limits<double>::infinity();
      double gap_sum = 0.0;
      for (Index l = 0; l < l_count; ++l) {
        double ma = 0.0, mb = 0.0;
        for (std::size_t i = 0; i < p.size(); ++i) {
          a[i] = pr(l, p[i]);
          ma += a[i];
        }
        for (std::size_t i = 0; i < q.size(); ++i) {
          b[i] = pr(l, q[i]);
          mb += b[i];
        }
        std::sort(a.begin(), a.end());
        std::sort(b.begin(), b.end());
        const double term = sorted_quantile_distance(a, b, power, nu);
        sum += term;
        best = std::max(best, term);
        const double gap = ma / static_cast<double>(p.size()) - mb / static_cast<double>(q.size());
        gap_sum += gap * gap;
      }
      const auto lc = static_cast<double>(l_count);
      if (kind == EstimatorKind::SupKQD) return best;
      if (kind == EstimatorKind::EKQD) return sum / lc;
      return sum / lc + mmd_part(p, q) - gap_sum / lc;
    };
  };
}

}  // namespace kdisc

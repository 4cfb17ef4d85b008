#pragma once

#include "kdisc/kernels.hpp"
#include "kdisc/kqd.hpp"
#include "kdisc/mmd.hpp"
#include "kdisc/rng.hpp"
#include "kdisc/types.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace kdisc {

struct TestConfig {
  double alpha = 0.05;
  Index permutations = 300;
  std::uint64_t seed = 0;

  void validate() const;
};

struct TestResult {
  double statistic = 0.0;
  double threshold = 0.0;
  bool reject = false;
  std::vector<double> null_samples;
};

// A statistic evaluated on one labelling of the pooled sample: the rows listed
// in p_idx play P, those in q_idx play Q. Must be safe to call concurrently.
using SplitStatistic = std::function<double(std::span<const Index> p_idx, std::span<const Index> q_idx)>;

// Builds the split statistic once per test. Anything random inside the
// statistic (KQD directions) is drawn here from test_seed, so every
// permutation sees the same statistic.
using StatisticBuilder =
    std::function<SplitStatistic(const PointSet& pooled, Index n_p, std::uint64_t test_seed)>;

// A plain two-sample statistic; wrapped by gathering rows per split.
using Statistic = std::function<double(const PointSet& p, const PointSet& q)>;

StatisticBuilder wrap_statistic(Statistic statistic);

// The ceil((1 - alpha) B)-th smallest null sample.
double permutation_threshold(std::vector<double> null_samples, double alpha);

TestResult permutation_test(const StatisticBuilder& builder, const PointSet& p, const PointSet& q,
                            const TestConfig& cfg);
TestResult permutation_test(const Statistic& statistic, const PointSet& p, const PointSet& q, const TestConfig& cfg);

using SampleGenerator = std::function<PointSet(RngStream& rng, Index n)>;

// Fraction of reps that reject. Data for rep r come from the streams
// split("P", r) and split("Q", r) of the base seed; every builder in the list
// is tested on the same data.
std::vector<double> rejection_rates(const std::vector<StatisticBuilder>& builders, const SampleGenerator& gen_p,
                                    const SampleGenerator& gen_q, Index n, Index reps, const TestConfig& cfg);
double rejection_rate(const StatisticBuilder& builder, const SampleGenerator& gen_p, const SampleGenerator& gen_q,
                      Index n, Index reps, const TestConfig& cfg);

// Lengthscale rule applied to the pooled sample once per test.
enum class Bandwidth { Fixed, MedianHeuristic };

struct MmdStatisticOptions {
  EstimatorKind kind = EstimatorKind::U;  // V, U, Linear or Multi
  Index subdiagonals = 1;                 // Multi only
  Bandwidth bandwidth = Bandwidth::Fixed;
  // Pooled samples up to this size cache their Gram matrix.
  Index gram_cache_limit = 4000;
};

StatisticBuilder mmd_statistic(const KernelSpec& spec, const MmdStatisticOptions& opts);

struct KqdStatisticOptions {
  EstimatorKind kind = EstimatorKind::EKQD;  // EKQD, SupKQD or CenteredEKQD
  int p = 2;
  // L = M = ceil(log N) when zero.
  Index directions = 0;
  Index anchors = 0;
  Bandwidth bandwidth = Bandwidth::Fixed;
  QuantileWeighting nu = QuantileWeighting::uniform();
};

StatisticBuilder kqd_statistic(const KernelSpec& spec, const KqdStatisticOptions& opts);

}  // namespace kdisc

#pragma once

#include "kdisc/bq.hpp"
#include "kdisc/calibration.hpp"
#include "kdisc/cbq.hpp"
#include "kdisc/two_sample.hpp"
#include "kdisc/types.hpp"

#include <cstdint>
#include <iosfwd>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace kdisc {

// Univariate g-and-k quantile function applied to standard normal draws.
struct GandK {
  double A = 3.0;
  double B = 1.0;
  double g = 0.1;
  double k = 0.1;
};

double gandk_quantile(const GandK& theta, double z);
Vector gandk_generate(const GandK& theta, const Vector& u);
Generator gandk_generator(const GandK& theta);

// Conjugate Gaussian linear model with prior N(0, diag(theta)) and likelihood
// precision eta. The posterior is N(m, S) with S^-1 = diag(1/theta) + eta Y^T Y
// and m = eta S Y^T Z.
struct BayesLinearModel {
  Matrix Y;  // m x d design
  Vector Z;  // m responses
  double eta = 0.1;

  Index dim() const noexcept { return Y.cols(); }
  GaussianMeasure posterior(PointView theta) const;
  // E[X^T X] = m^T m + tr S.
  double second_moment(PointView theta) const;
};

BayesLinearModel bayes_linear_model(Index d, Index m, double eta, std::uint64_t seed);

struct BayesLinearTask {
  BayesLinearModel model;
  ConditionalTask task;
  Vector truth;  // analytic I(theta_t)
};

// Draws N posterior samples per theta with f(x) = x^T x.
BayesLinearTask bayes_linear_task(const BayesLinearModel& model, const PointSet& thetas, Index n,
                                  std::uint64_t seed);
// T parameters uniform on (lo, hi)^d.
PointSet uniform_thetas(Index t, Index d, double lo, double hi, RngStream& rng);

// Flat key=value configuration. Lines starting with '#' are comments.
class Config {
 public:
  static Config parse(std::istream& in);
  static Config parse_file(const std::string& path);

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  bool has(const std::string& key) const { return values_.count(key) > 0; }
  bool empty() const noexcept { return values_.empty(); }
  const std::map<std::string, std::string>& values() const noexcept { return values_; }

  std::string get(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  std::vector<std::string> get_list(const std::string& key, const std::vector<std::string>& fallback) const;
  std::vector<double> get_double_list(const std::string& key, const std::vector<double>& fallback) const;

  // Throws ConfigError naming the first key outside the allowed set.
  void require_known(const std::set<std::string>& allowed) const;

 private:
  std::map<std::string, std::string> values_;
};

struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// 17 significant digits, '.' decimal point, independent of the locale.
std::string format_double(double v);

using CsvField = std::variant<std::string, double, std::int64_t, std::uint64_t>;

class CsvWriter {
 public:
  CsvWriter(std::ostream& out, std::vector<std::string> header);
  void row(const std::vector<CsvField>& fields);

 private:
  std::ostream& out_;
  std::size_t columns_;
};

std::vector<std::vector<std::string>> parse_csv(std::istream& in);

// Mean scale estimates over seeded paths on uniform grids of size n.
struct CalibRateResult {
  std::vector<double> ns;
  std::vector<ScaleEstimator> estimators;
  // values[e][i][r]: estimator e, grid ns[i], replicate r.
  std::vector<std::vector<std::vector<double>>> values;

  double mean(std::size_t e, std::size_t i) const;
  double slope(std::size_t e) const;
};

CalibRateResult calib_rates(ProcessKind process, double hurst, const std::vector<ScaleEstimator>& estimators,
                            const std::vector<Index>& ns, Index seeds, std::uint64_t seed, double T = 1.0,
                            double rate = 1.0);

struct OwBenchConfig {
  GandK theta;
  Index n = 256;
  Index m = 10000;
  Index seeds = 20;
  std::uint64_t seed = 0;
  double nugget = 1e-8;  // relative to mean(diag C)
};

struct OwBenchResult {
  std::vector<double> ow;  // per seed |MMD^2 estimate - 0|
  std::vector<double> v;
  double mean_ow() const;
  double mean_v() const;
};

// P_theta,N against a fixed P_theta,M reference sample, whose squared MMD to
// itself is the zero pseudo-truth.
OwBenchResult ow_benchmark(const OwBenchConfig& cfg);

struct CbqDemoConfig {
  Index d = 2;
  Index n = 50;
  Index t = 50;
  Index test_points = 100;
  Index design_rows = 10;
  double eta = 0.1;
  std::uint64_t seed = 0;
};

struct CbqDemoResult {
  double rmse_cbq = 0.0;
  double rmse_klsmc = 0.0;
  double rmse_lsmc = 0.0;
  int lsmc_degree = 0;
};

CbqDemoResult cbq_demo(const CbqDemoConfig& cfg);

struct RunSummary {
  std::string experiment;
  std::vector<std::pair<std::string, double>> metrics;
  double seconds = 0.0;
};

std::ostream& operator<<(std::ostream& out, const RunSummary& s);

// Laplace with scale 1 / sqrt(2): unit variance, like the standard normal.
PointSet sample_laplace(RngStream& rng, Index n);
PointSet sample_normal(RngStream& rng, Index n, Index d = 1);

// Names: mmd-v, mmd-u, mmd-linear, mmd-multi, ekqd, supkqd, cekqd.
const std::vector<std::string>& statistic_names();
StatisticBuilder named_statistic(const std::string& name, const KernelSpec& spec, Bandwidth bandwidth);

const std::vector<std::string>& subcommands();
// Runs one subcommand; CSV rows go to csv, returns the printed summary.
RunSummary run_experiment(const std::string& subcommand, const Config& cfg, std::ostream& csv);

}  // namespace kdisc

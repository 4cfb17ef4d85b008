#include "kdisc/experiments.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace kdisc {

double gandk_quantile(const GandK& theta, double z) {
  const double e = std::exp(-theta.g * z);
  return theta.A + theta.B * (1.0 + 0.8 * (1.0 - e) / (1.0 + e)) * std::pow(1.0 + z * z, theta.k) * z;
}

Vector gandk_generate(const GandK& theta, const Vector& u) {
  if (!(theta.B > 0.0)) throw DomainError("g-and-k: B must be positive");
  Vector out(u.size());
  for (Index i = 0; i < u.size(); ++i) out(i) = gandk_quantile(theta, u(i));
  return out;
}

Generator gandk_generator(const GandK& theta) {
  if (!(theta.B > 0.0)) throw DomainError("g-and-k: B must be positive");
  return [theta](PointView u) {
    Vector x(1);
    x(0) = gandk_quantile(theta, u[0]);
    return x;
  };
}

GaussianMeasure BayesLinearModel::posterior(PointView theta) const {
  const Index d = dim();
  if (static_cast<Index>(theta.size()) != d) throw ShapeError("bayes linear model: theta dimension mismatch");
  Matrix precision = eta * Y.transpose() * Y;
  for (Index j = 0; j < d; ++j) {
    if (!(theta[static_cast<std::size_t>(j)] > 0.0)) throw DomainError("bayes linear model: theta must be positive");
    precision(j, j) += 1.0 / theta[static_cast<std::size_t>(j)];
  }
  const Eigen::LLT<Matrix> llt(precision);
  Matrix cov = llt.solve(Matrix::Identity(d, d));
  cov = 0.5 * (cov + cov.transpose());
  Vector mean = eta * cov * (Y.transpose() * Z);
  return {std::move(mean), std::move(cov)};
}

double BayesLinearModel::second_moment(PointView theta) const {
  const GaussianMeasure m = posterior(theta);
  return m.mean.squaredNorm() + m.cov.trace();
}

BayesLinearModel bayes_linear_model(Index d, Index m, double eta, std::uint64_t seed) {
  if (d < 1 || m < 1) throw std::invalid_argument("bayes linear model: d and m must be positive");
  if (!(eta >= 0.0)) throw std::invalid_argument("bayes linear model: eta must be >= 0");
  RngStream rng(seed, "design");
  BayesLinearModel model;
  model.eta = eta;
  model.Y.resize(m, d);
  for (Index i = 0; i < m; ++i)
    for (Index j = 0; j < d; ++j) model.Y(i, j) = rng.normal();
  model.Z.resize(m);
  for (Index i = 0; i < m; ++i) model.Z(i) = rng.normal();
  return model;
}

BayesLinearTask bayes_linear_task(const BayesLinearModel& model, const PointSet& thetas, Index n,
                                  std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("bayes linear task: need at least one sample per theta");
  const Index d = model.dim();
  BayesLinearTask out;
  out.model = model;
  out.task.thetas = thetas;
  out.task.samples.resize(static_cast<std::size_t>(thetas.rows()));
  out.task.fvals.resize(static_cast<std::size_t>(thetas.rows()));
  out.truth.resize(thetas.rows());
  const RngStream root(seed, "bayes_linear");
  for (Index t = 0; t < thetas.rows(); ++t) {
    const GaussianMeasure post = model.posterior(point(thetas, t));
    const Matrix l = Eigen::LLT<Matrix>(post.cov).matrixL();
    RngStream rng = root.split("theta", static_cast<std::uint64_t>(t));
    PointSet xs(n, d);
    Vector f(n);
    for (Index i = 0; i < n; ++i) {
      Vector z(d);
      for (Index j = 0; j < d; ++j) z(j) = rng.normal();
      const Vector x = post.mean + l * z;
      xs.row(i) = x.transpose();
      f(i) = x.squaredNorm();
    }
    out.task.samples[static_cast<std::size_t>(t)] = std::move(xs);
    out.task.fvals[static_cast<std::size_t>(t)] = std::move(f);
    out.truth(t) = post.mean.squaredNorm() + post.cov.trace();
  }
  out.task.measure = [model](PointView theta) -> Measure { return model.posterior(theta); };
  out.task.kernel_x = KernelSpec::gaussian(1.0, 1.0);
  out.task.kernel_theta = KernelSpec::matern(MaternOrder::ThreeHalves, 1.0, 1.0);
  return out;
}

PointSet uniform_thetas(Index t, Index d, double lo, double hi, RngStream& rng) {
  PointSet out(t, d);
  for (Index i = 0; i < t; ++i)
    for (Index j = 0; j < d; ++j) out(i, j) = lo + (hi - lo) * rng.uniform();
  return out;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <class T>
T parse_number(const std::string& key, const std::string& text) {
  T v{};
  const char* first = text.data();
  const char* last = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) throw ConfigError("config: bad value for " + key + ": '" + text + "'");
  return v;
}

}  // namespace

Config Config::parse(std::istream& in) {
  Config cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key=value");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
    cfg.set(key, trim(line.substr(eq + 1)));
  }
  return cfg;
}

Config Config::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  return parse(in);
}

std::string Config::get(const std::string& key, const std::string& fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

double Config::get_double(const std::string& key, double fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : parse_number<double>(key, it->second);
}

std::int64_t Config::get_int(const std::string& key, std::int64_t fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : parse_number<std::int64_t>(key, it->second);
}

std::uint64_t Config::get_u64(const std::string& key, std::uint64_t fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : parse_number<std::uint64_t>(key, it->second);
}

std::vector<std::string> Config::get_list(const std::string& key, const std::vector<std::string>& fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : split_list(it->second);
}

std::vector<double> Config::get_double_list(const std::string& key, const std::vector<double>& fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::vector<double> out;
  for (const auto& item : split_list(it->second)) out.push_back(parse_number<double>(key, item));
  return out;
}

void Config::require_known(const std::set<std::string>& allowed) const {
  for (const auto& [key, value] : values_)
    if (!allowed.count(key)) throw ConfigError("unknown config key: " + key);
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

CsvWriter::CsvWriter(std::ostream& out, std::vector<std::string> header) : out_(out), columns_(header.size()) {
  for (std::size_t i = 0; i < header.size(); ++i) out_ << (i ? "," : "") << header[i];
  out_ << '\n';
}

void CsvWriter::row(const std::vector<CsvField>& fields) {
  if (fields.size() != columns_) throw std::invalid_argument("csv: row width differs from header");
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out_ << ',';
    std::visit(
        [this](const auto& v) {
          using T = std::decay_t<decltype(v)>;
          if constexpr (std::is_same_v<T, double>)
            out_ << format_double(v);
          else
            out_ << v;
        },
        fields[i]);
  }
  out_ << '\n';
}

std::vector<std::vector<std::string>> parse_csv(std::istream& in) {
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> row;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) row.push_back(cell);
    if (!line.empty() && line.back() == ',') row.emplace_back();
    rows.push_back(std::move(row));
  }
  return rows;
}

double CalibRateResult::mean(std::size_t e, std::size_t i) const {
  const auto& v = values[e][i];
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double CalibRateResult::slope(std::size_t e) const {
  std::vector<double> means;
  for (std::size_t i = 0; i < ns.size(); ++i) means.push_back(mean(e, i));
  return rate_slope(ns, means);
}

CalibRateResult calib_rates(ProcessKind process, double hurst, const std::vector<ScaleEstimator>& estimators,
                            const std::vector<Index>& ns, Index seeds, std::uint64_t seed, double T, double rate) {
  if (seeds < 1) throw std::invalid_argument("calib_rates: need at least one replicate");
  CalibRateResult out;
  out.estimators = estimators;
  out.values.assign(estimators.size(), std::vector<std::vector<double>>(ns.size()));
  const RngStream root(seed, "calib_rates");
  for (std::size_t i = 0; i < ns.size(); ++i) {
    const Index n = ns[i];
    out.ns.push_back(static_cast<double>(n));
    const Partition grid = Partition::uniform(T, n);
    const PathSampler sampler(process, grid, hurst, rate);
    std::vector<RngStream> streams;
    const RngStream level = root.split("n", static_cast<std::uint64_t>(n));
    for (Index r = 0; r < seeds; ++r) streams.push_back(level.split("path", static_cast<std::uint64_t>(r)));
    const Matrix paths = sampler.sample(streams);
    for (std::size_t e = 0; e < estimators.size(); ++e) {
      auto& vals = out.values[e][i];
      vals.resize(static_cast<std::size_t>(seeds));
#pragma omp parallel for schedule(static)
      for (Index r = 0; r < seeds; ++r)
        vals[static_cast<std::size_t>(r)] = scale_estimate(estimators[e], grid, paths.col(r)).value;
    }
  }
  return out;
}

namespace {

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

PointSet normal_column(RngStream& rng, Index n) {
  PointSet out(n, 1);
  for (Index i = 0; i < n; ++i) out(i, 0) = rng.normal();
  return out;
}

}  // namespace

double OwBenchResult::mean_ow() const { return mean_of(ow); }
double OwBenchResult::mean_v() const { return mean_of(v); }

OwBenchResult ow_benchmark(const OwBenchConfig& cfg) {
  if (cfg.n < 2 || cfg.m < 2 || cfg.seeds < 1) throw std::invalid_argument("ow_benchmark: bad sizes");
  const RngStream root(cfg.seed, "ow_bench");
  RngStream ref_rng = root.split("reference");
  const PointSet ref_u = normal_column(ref_rng, cfg.m);
  PointSet ref_x(cfg.m, 1);
  ref_x.col(0) = gandk_generate(cfg.theta, ref_u.col(0));

  const KernelSpec k = KernelSpec::gaussian(1.0, median_heuristic(ref_x, derive_seed(cfg.seed, "k_bandwidth")));
  const KernelSpec c = KernelSpec::gaussian(1.0, median_heuristic(ref_u, derive_seed(cfg.seed, "c_bandwidth")));
  const Embedding emb_c(c, GaussianMeasure{Vector::Zero(1), Matrix::Identity(1, 1)});
  const EmpiricalMeasure q = EmpiricalMeasure::uniform(ref_x);
  const double m = static_cast<double>(cfg.m);
  const double qq_mean = kernel_sum_self(k, ref_x, true) / (m * m);
  const Generator gen = gandk_generator(cfg.theta);

  OwBenchResult out;
  out.ow.resize(static_cast<std::size_t>(cfg.seeds));
  out.v.resize(static_cast<std::size_t>(cfg.seeds));
  for (Index s = 0; s < cfg.seeds; ++s) {
    RngStream rng = root.split("replicate", static_cast<std::uint64_t>(s));
    const PointSet u = normal_column(rng, cfg.n);
    const PointSet x = apply_generator(gen, u);
    out.v[static_cast<std::size_t>(s)] = std::abs(mmd2_weighted(k, EmpiricalMeasure::weighted(x, Vector::Constant(cfg.n, 1.0 / static_cast<double>(cfg.n))), q, qq_mean));
    out.ow[static_cast<std::size_t>(s)] =
        std::abs(ow_mmd2(k, emb_c, gen, u, q, qq_mean, JitterPolicy::fixed(cfg.nugget)));
  }
  return out;
}

namespace {

double rmse(const std::vector<double>& pred, const Vector& truth) {
  double s = 0.0;
  for (Index i = 0; i < truth.size(); ++i) {
    const double r = pred[static_cast<std::size_t>(i)] - truth(i);
    s += r * r;
  }
  return std::sqrt(s / static_cast<double>(truth.size()));
}

}  // namespace

CbqDemoResult cbq_demo(const CbqDemoConfig& cfg) {
  const RngStream root(cfg.seed, "cbq_demo");
  const BayesLinearModel model = bayes_linear_model(cfg.d, cfg.design_rows, cfg.eta, derive_seed(cfg.seed, "model"));
  RngStream theta_rng = root.split("train_theta");
  const PointSet thetas = uniform_thetas(cfg.t, cfg.d, 1.0, 3.0, theta_rng);
  BayesLinearTask train = bayes_linear_task(model, thetas, cfg.n, derive_seed(cfg.seed, "train_samples"));

  RngStream test_rng = root.split("test_theta");
  const PointSet test = uniform_thetas(cfg.test_points, cfg.d, 1.0, 3.0, test_rng);
  Vector truth(test.rows());
  for (Index i = 0; i < test.rows(); ++i) truth(i) = model.second_moment(point(test, i));

  CbqDemoResult out;
  const CbqGrids grids;
  const Standardization st = Standardization::fit(train.task.fvals);
  const CbqHyperparameters hp = empirical_bayes_grid(train.task, grids, st);
  ConditionalTask task = train.task;
  task.kernel_x = hp.kernel_x;
  task.kernel_theta = hp.kernel_theta;
  const CbqPosterior post = cbq_fit(task, hp.lambda_theta, 0.0, st);
  std::vector<double> pred(static_cast<std::size_t>(test.rows()));
  for (Index i = 0; i < test.rows(); ++i) pred[static_cast<std::size_t>(i)] = cbq_predict(post, point(test, i)).mean;
  out.rmse_cbq = rmse(pred, truth);

  const Vector mc = monte_carlo_means(train.task);
  const double shift = mc.mean();
  const double sd = std::sqrt((mc.array() - shift).square().mean());
  const double scale = sd > 0.0 ? sd : 1.0;
  const Vector y = (mc.array() - shift) / scale;
  const GridSelection sel = select_hyperparameters(train.task.kernel_theta, thetas, y, Vector::Zero(y.size()),
                                                   grids.amplitudes, grids.lengthscales, grids.lambdas);
  const KernelSpec k_theta = train.task.kernel_theta.with_amplitude(sel.amplitude).with_lengthscale(sel.lengthscale);
  const KernelRidgeModel krr = klsmc_fit(thetas, y, k_theta, sel.lambda);
  for (Index i = 0; i < test.rows(); ++i)
    pred[static_cast<std::size_t>(i)] = shift + scale * krr.predict(point(test, i));
  out.rmse_klsmc = rmse(pred, truth);

  RngStream val_rng = root.split("validation_theta");
  const PointSet val_thetas = uniform_thetas(cfg.t, cfg.d, 1.0, 3.0, val_rng);
  const BayesLinearTask val = bayes_linear_task(model, val_thetas, cfg.n, derive_seed(cfg.seed, "validation_samples"));
  out.lsmc_degree = select_lsmc_degree(thetas, mc, val_thetas, monte_carlo_means(val.task));
  const PolynomialModel poly = lsmc_fit(thetas, mc, out.lsmc_degree);
  for (Index i = 0; i < test.rows(); ++i) pred[static_cast<std::size_t>(i)] = poly.predict(point(test, i));
  out.rmse_lsmc = rmse(pred, truth);
  return out;
}

std::ostream& operator<<(std::ostream& out, const RunSummary& s) {
  out << s.experiment;
  for (const auto& [name, value] : s.metrics) out << ' ' << name << '=' << format_double(value);
  out << " seconds=" << format_double(s.seconds);
  return out;
}

PointSet sample_laplace(RngStream& rng, Index n) {
  const double b = 1.0 / std::sqrt(2.0);
  PointSet out(n, 1);
  for (Index i = 0; i < n; ++i) {
    double u = 0.0;
    while (u == 0.0) u = rng.uniform();
    out(i, 0) = u < 0.5 ? b * std::log(2.0 * u) : -b * std::log(2.0 * (1.0 - u));
  }
  return out;
}

PointSet sample_normal(RngStream& rng, Index n, Index d) {
  PointSet out(n, d);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < d; ++j) out(i, j) = rng.normal();
  return out;
}

const std::vector<std::string>& statistic_names() {
  static const std::vector<std::string> names{"mmd-v", "mmd-u", "mmd-linear", "mmd-multi", "ekqd", "supkqd", "cekqd"};
  return names;
}

StatisticBuilder named_statistic(const std::string& name, const KernelSpec& spec, Bandwidth bandwidth) {
  auto mmd = [&](EstimatorKind kind) {
    MmdStatisticOptions opts;
    opts.kind = kind;
    opts.bandwidth = bandwidth;
    return mmd_statistic(spec, opts);
  };
  auto kqd = [&](EstimatorKind kind) {
    KqdStatisticOptions opts;
    opts.kind = kind;
    opts.bandwidth = bandwidth;
    return kqd_statistic(spec, opts);
  };
  if (name == "mmd-v") return mmd(EstimatorKind::V);
  if (name == "mmd-u") return mmd(EstimatorKind::U);
  if (name == "mmd-linear") return mmd(EstimatorKind::Linear);
  if (name == "mmd-multi") {
    // R = ceil(log N)^2 subdiagonals, capped at N - 1.
    return [spec, bandwidth](const PointSet& pooled, Index n_p, std::uint64_t test_seed) {
      const auto l = static_cast<Index>(std::ceil(std::log(static_cast<double>(n_p))));
      MmdStatisticOptions opts;
      opts.kind = EstimatorKind::Multi;
      opts.bandwidth = bandwidth;
      opts.subdiagonals = std::clamp<Index>(l * l, 1, n_p - 1);
      return mmd_statistic(spec, opts)(pooled, n_p, test_seed);
    };
  }
  if (name == "ekqd") return kqd(EstimatorKind::EKQD);
  if (name == "supkqd") return kqd(EstimatorKind::SupKQD);
  if (name == "cekqd") return kqd(EstimatorKind::CenteredEKQD);
  throw ConfigError("unknown statistic: " + name);
}

const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> names{"calib-rates", "calib-limits", "mmd-bench",
                                              "ow-bench",    "kqd-test",     "cbq-demo"};
  return names;
}

namespace {

ProcessKind parse_process(const std::string& s) {
  if (s == "fbm") return ProcessKind::FBM;
  if (s == "ifbm") return ProcessKind::IFBM;
  if (s == "bm") return ProcessKind::BM;
  if (s == "ou") return ProcessKind::OU;
  if (s == "iifbm") return ProcessKind::IIFBM;
  if (s == "jump") return ProcessKind::PiecewiseJump;
  throw ConfigError("unknown process: " + s);
}

ScaleEstimator parse_estimator(const std::string& s) {
  if (s == "CV" || s == "cv") return ScaleEstimator::CV;
  if (s == "ML" || s == "ml") return ScaleEstimator::ML;
  if (s == "ICV" || s == "icv") return ScaleEstimator::ICV;
  throw ConfigError("unknown estimator: " + s);
}

std::vector<Index> index_list(const Config& cfg, const std::string& key, const std::vector<Index>& fallback) {
  if (!cfg.has(key)) return fallback;
  std::vector<Index> out;
  for (double v : cfg.get_double_list(key, {})) {
    if (v < 1 || v != std::floor(v)) throw ConfigError("config: " + key + " must hold positive integers");
    out.push_back(static_cast<Index>(v));
  }
  if (out.empty()) throw ConfigError("config: " + key + " is empty");
  return out;
}

Index reps_of(const Config& cfg, Index fallback) {
  const auto r = cfg.has("reps") ? cfg.get_int("reps", fallback) : cfg.get_int("seeds", fallback);
  if (r < 1) throw ConfigError("config: reps must be positive");
  return static_cast<Index>(r);
}

RunSummary run_calib_rates(const Config& cfg, std::ostream& csv) {
  cfg.require_known({"process", "hurst", "rate", "T", "estimators", "n", "seeds", "reps", "seed"});
  const ProcessKind process = parse_process(cfg.get("process", "ifbm"));
  const double hurst = cfg.get_double("hurst", 0.5);
  std::vector<ScaleEstimator> ests;
  for (const auto& e : cfg.get_list("estimators", {"CV", "ML"})) ests.push_back(parse_estimator(e));
  const auto ns = index_list(cfg, "n", {100, 1000, 10000});
  const Index reps = reps_of(cfg, 100);
  const auto res = calib_rates(process, hurst, ests, ns, reps, cfg.get_u64("seed", 0), cfg.get_double("T", 1.0),
                               cfg.get_double("rate", 1.0));
  CsvWriter w(csv, {"experiment", "process", "hurst", "estimator", "n", "replicate", "value"});
  RunSummary s{"calib-rates", {}, 0.0};
  for (std::size_t e = 0; e < ests.size(); ++e) {
    for (std::size_t i = 0; i < ns.size(); ++i)
      for (std::size_t r = 0; r < res.values[e][i].size(); ++r)
        w.row({std::string("calib-rates"), process_name(process), hurst, scale_estimator_name(ests[e]),
               static_cast<std::int64_t>(ns[i]), static_cast<std::int64_t>(r), res.values[e][i][r]});
    s.metrics.emplace_back("slope_" + scale_estimator_name(ests[e]), res.slope(e));
  }
  return s;
}

RunSummary run_calib_limits(const Config& cfg, std::ostream& csv) {
  cfg.require_known({"function", "n", "seed", "T"});
  const std::string fn = cfg.get("function", "jump");
  const double T = cfg.get_double("T", 1.0);
  const auto ns = index_list(cfg, "n", {1000, 10000, 100000});
  RngStream rng(cfg.get_u64("seed", 0), "calib_limits");
  const double jump_at = rng.uniform() * T;
  auto f = [&](double x) {
    if (fn == "jump") return std::sin(10.0 * x) + (x > jump_at ? 1.0 : 0.0);
    if (fn == "linear") return x;
    if (fn == "square") return x * x;
    throw ConfigError("unknown function: " + fn);
  };
  CsvWriter w(csv, {"experiment", "function", "n", "quantity", "value"});
  RunSummary s{"calib-limits", {}, 0.0};
  for (Index n : ns) {
    const Partition part = Partition::uniform(T, n);
    Vector fv(n);
    for (Index i = 0; i < n; ++i) fv(i) = f(part[i]);
    const double cv = cv_estimate(part, fv).value;
    const double ml = ml_estimate(part, fv).value;
    const double qv = quadratic_variation(part, fv);
    const std::vector<std::pair<std::string, double>> rows{
        {"CV", cv}, {"ML", ml}, {"ICV", icv_estimate(part, fv).value}, {"N_ML", static_cast<double>(n) * ml},
        {"QV", qv}};
    for (const auto& [name, v] : rows)
      w.row({std::string("calib-limits"), fn, static_cast<std::int64_t>(n), name, v});
    if (n == ns.back()) {
      s.metrics.emplace_back("CV", cv);
      s.metrics.emplace_back("N_ML", static_cast<double>(n) * ml);
    }
  }
  return s;
}

RunSummary run_mmd_bench(const Config& cfg, std::ostream& csv) {
  cfg.require_known({"n", "estimators", "lengthscale", "reps", "seeds", "seed"});
  const auto ns = index_list(cfg, "n", {1000, 4000});
  const auto names = cfg.get_list("estimators", {"v", "u", "linear", "ekqd"});
  const KernelSpec k = KernelSpec::gaussian(1.0, cfg.get_double("lengthscale", 1.0));
  const Index reps = reps_of(cfg, 3);
  const std::uint64_t seed = cfg.get_u64("seed", 0);
  CsvWriter w(csv, {"experiment", "estimator", "n", "replicate", "value", "seconds"});
  RunSummary s{"mmd-bench", {}, 0.0};
  for (const auto& name : names) {
    std::vector<double> best(ns.size(), std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i < ns.size(); ++i) {
      for (Index r = 0; r < reps; ++r) {
        RngStream rng = RngStream(seed, "mmd_bench").split("replicate", static_cast<std::uint64_t>(r));
        const auto p = EmpiricalMeasure::uniform(sample_normal(rng, ns[i]));
        const auto q = EmpiricalMeasure::uniform(sample_normal(rng, ns[i]));
        const auto t0 = std::chrono::steady_clock::now();
        double v = 0.0;
        if (name == "v")
          v = mmd2_v(k, p, q);
        else if (name == "u")
          v = mmd2_u(k, p, q);
        else if (name == "linear")
          v = mmd2_linear(k, p, q);
        else if (name == "ekqd")
          v = ekqd_p(k, p, q, KqdConfig::log_scaled(ns[i], 2, seed));
        else
          throw ConfigError("unknown estimator: " + name);
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        best[i] = std::min(best[i], secs);
        w.row({std::string("mmd-bench"), name, static_cast<std::int64_t>(ns[i]), static_cast<std::int64_t>(r), v,
               secs});
      }
    }
    if (ns.size() > 1) s.metrics.emplace_back("time_ratio_" + name, best.back() / best.front());
  }
  return s;
}

RunSummary run_ow_bench(const Config& cfg, std::ostream& csv) {
  cfg.require_known({"A", "B", "g", "k", "n", "m", "reps", "seeds", "seed", "nugget"});
  OwBenchConfig oc;
  oc.theta = {cfg.get_double("A", 3.0), cfg.get_double("B", 1.0), cfg.get_double("g", 0.1), cfg.get_double("k", 0.1)};
  oc.n = static_cast<Index>(cfg.get_int("n", 256));
  oc.m = static_cast<Index>(cfg.get_int("m", 10000));
  oc.seeds = reps_of(cfg, 20);
  oc.seed = cfg.get_u64("seed", 0);
  oc.nugget = cfg.get_double("nugget", 1e-8);
  const OwBenchResult res = ow_benchmark(oc);
  CsvWriter w(csv, {"experiment", "replicate", "estimator", "abs_error"});
  for (std::size_t r = 0; r < res.ow.size(); ++r) {
    w.row({std::string("ow-bench"), static_cast<std::int64_t>(r), std::string("OW"), res.ow[r]});
    w.row({std::string("ow-bench"), static_cast<std::int64_t>(r), std::string("V"), res.v[r]});
  }
  return {"ow-bench", {{"mean_abs_error_OW", res.mean_ow()}, {"mean_abs_error_V", res.mean_v()}}, 0.0};
}

RunSummary run_kqd_test(const Config& cfg, std::ostream& csv) {
  cfg.require_known({"alternative", "kernel", "lengthscale", "n", "reps", "seeds", "permutations", "alpha",
                     "statistics", "seed"});
  const std::string alt = cfg.get("alternative", "laplace");
  const std::string kname = cfg.get("kernel", "poly3");
  KernelSpec k;
  Bandwidth bw = Bandwidth::Fixed;
  if (kname == "poly3") {
    k = KernelSpec::polynomial(3, 1.0, 1.0);
  } else if (kname == "gaussian") {
    k = KernelSpec::gaussian(1.0, cfg.get_double("lengthscale", 1.0));
    if (!cfg.has("lengthscale")) bw = Bandwidth::MedianHeuristic;
  } else {
    throw ConfigError("unknown kernel: " + kname);
  }
  SampleGenerator gen_q;
  if (alt == "laplace")
    gen_q = [](RngStream& rng, Index n) { return sample_laplace(rng, n); };
  else if (alt == "gaussian")
    gen_q = [](RngStream& rng, Index n) { return sample_normal(rng, n); };
  else
    throw ConfigError("unknown alternative: " + alt);
  const SampleGenerator gen_p = [](RngStream& rng, Index n) { return sample_normal(rng, n); };
  const auto names = cfg.get_list("statistics", {"ekqd", "mmd-u"});
  std::vector<StatisticBuilder> builders;
  for (const auto& name : names) builders.push_back(named_statistic(name, k, bw));
  TestConfig tc;
  tc.alpha = cfg.get_double("alpha", 0.05);
  tc.permutations = static_cast<Index>(cfg.get_int("permutations", 300));
  tc.seed = cfg.get_u64("seed", 0);
  const Index reps = reps_of(cfg, 50);
  const auto ns = index_list(cfg, "n", {500, 5000});
  CsvWriter w(csv, {"experiment", "alternative", "kernel", "n", "statistic", "rejection_rate"});
  RunSummary s{"kqd-test", {}, 0.0};
  for (Index n : ns) {
    const auto rates = rejection_rates(builders, gen_p, gen_q, n, reps, tc);
    for (std::size_t b = 0; b < names.size(); ++b) {
      w.row({std::string("kqd-test"), alt, kname, static_cast<std::int64_t>(n), names[b], rates[b]});
      if (n == ns.back()) s.metrics.emplace_back("rate_" + names[b], rates[b]);
    }
  }
  return s;
}

RunSummary run_cbq_demo(const Config& cfg, std::ostream& csv) {
  cfg.require_known({"d", "n", "t", "test_points", "design_rows", "eta", "reps", "seeds", "seed"});
  CbqDemoConfig cc;
  cc.d = static_cast<Index>(cfg.get_int("d", 2));
  cc.t = static_cast<Index>(cfg.get_int("t", 50));
  cc.test_points = static_cast<Index>(cfg.get_int("test_points", 100));
  cc.design_rows = static_cast<Index>(cfg.get_int("design_rows", 10));
  cc.eta = cfg.get_double("eta", 0.1);
  const auto ns = index_list(cfg, "n", {10, 50});
  const Index reps = reps_of(cfg, 10);
  const std::uint64_t seed = cfg.get_u64("seed", 0);
  CsvWriter w(csv, {"experiment", "n", "replicate", "method", "rmse"});
  RunSummary s{"cbq-demo", {}, 0.0};
  for (Index n : ns) {
    double cbq = 0.0, klsmc = 0.0, lsmc = 0.0;
    for (Index r = 0; r < reps; ++r) {
      cc.n = n;
      cc.seed = derive_seed(seed, "replicate" + std::to_string(r));
      const CbqDemoResult res = cbq_demo(cc);
      w.row({std::string("cbq-demo"), static_cast<std::int64_t>(n), static_cast<std::int64_t>(r), std::string("CBQ"),
             res.rmse_cbq});
      w.row({std::string("cbq-demo"), static_cast<std::int64_t>(n), static_cast<std::int64_t>(r),
             std::string("KLSMC"), res.rmse_klsmc});
      w.row({std::string("cbq-demo"), static_cast<std::int64_t>(n), static_cast<std::int64_t>(r),
             std::string("LSMC"), res.rmse_lsmc});
      cbq += res.rmse_cbq;
      klsmc += res.rmse_klsmc;
      lsmc += res.rmse_lsmc;
    }
    if (n == ns.back()) {
      const double inv = 1.0 / static_cast<double>(reps);
      s.metrics = {{"rmse_CBQ", cbq * inv}, {"rmse_KLSMC", klsmc * inv}, {"rmse_LSMC", lsmc * inv}};
    }
  }
  return s;
}

}  // namespace

RunSummary run_experiment(const std::string& subcommand, const Config& cfg, std::ostream& csv) {
  const auto t0 = std::chrono::steady_clock::now();
  RunSummary s;
  if (subcommand == "calib-rates")
    s = run_calib_rates(cfg, csv);
  else if (subcommand == "calib-limits")
    s = run_calib_limits(cfg, csv);
  else if (subcommand == "mmd-bench")
    s = run_mmd_bench(cfg, csv);
  else if (subcommand == "ow-bench")
    s = run_ow_bench(cfg, csv);
  else if (subcommand == "kqd-test")
    s = run_kqd_test(cfg, csv);
  else if (subcommand == "cbq-demo")
    s = run_cbq_demo(cfg, csv);
  else
    throw ConfigError("unknown subcommand: " + subcommand);
  s.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return s;
}

}  // namespace kdisc

#include "kdisc/cbq.hpp"

#include <Eigen/QR>

#include <cmath>
#include <exception>
#include <functional>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace kdisc {

void ConditionalTask::validate() const {
  const Index t = thetas.rows();
  if (t < 1) throw ShapeError("conditional task: need at least one theta");
  if (static_cast<Index>(samples.size()) != t || static_cast<Index>(fvals.size()) != t)
    throw ShapeError("conditional task: per-theta sample and value lists must match theta count");
  const Index n = samples.front().rows();
  for (Index i = 0; i < t; ++i) {
    if (samples[static_cast<std::size_t>(i)].rows() != n)
      throw ShapeError("conditional task: per-theta sample counts differ");
    if (fvals[static_cast<std::size_t>(i)].size() != n)
      throw ShapeError("conditional task: value count differs from sample count");
  }
  if (!measure) throw std::invalid_argument("conditional task: missing measure factory");
}

Standardization Standardization::fit(const std::vector<Vector>& fvals) {
  double sum = 0.0;
  double count = 0.0;
  for (const auto& f : fvals) {
    sum += f.sum();
    count += static_cast<double>(f.size());
  }
  if (count == 0.0) return identity();
  const double mean = sum / count;
  double ss = 0.0;
  for (const auto& f : fvals) ss += (f.array() - mean).square().sum();
  const double sd = std::sqrt(ss / count);
  return {mean, sd > 0.0 ? sd : 1.0};
}

namespace {

struct Stage1 {
  std::vector<double> mean;
  std::vector<double> var;
  std::vector<Vector> weights;
};

Stage1 run_stage1(const ConditionalTask& task, const KernelSpec& kernel_x, double lambda_x,
                  const Standardization& st) {
  const Index t_count = task.size();
  Stage1 out{std::vector<double>(static_cast<std::size_t>(t_count)),
             std::vector<double>(static_cast<std::size_t>(t_count)),
             std::vector<Vector>(static_cast<std::size_t>(t_count))};
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(t_count));
  std::vector<std::string> messages(static_cast<std::size_t>(t_count));
#pragma omp parallel for schedule(dynamic, 1)
  for (Index t = 0; t < t_count; ++t) {
    const auto ti = static_cast<std::size_t>(t);
    try {
      const Embedding emb(kernel_x, task.measure(point(task.thetas, t)));
      const Vector f = (task.fvals[ti].array() - st.shift) / st.scale;
      const BqResult r = bq_posterior(emb, task.samples[ti], f, lambda_x);
      out.mean[ti] = r.mean;
      out.var[ti] = r.variance;
      out.weights[ti] = r.rule.weights;
    } catch (const std::exception& e) {
      messages[ti] = e.what();
      errors[ti] = std::current_exception();
    }
  }
  for (std::size_t t = 0; t < errors.size(); ++t) {
    if (!errors[t]) continue;
    std::ostringstream msg;
    msg << "cbq stage 1, t = " << t << ": " << messages[t];
    throw std::runtime_error(msg.str());
  }
  return out;
}

}  // namespace

CbqPosterior cbq_fit(const ConditionalTask& task, double lambda_theta, double lambda_x,
                     const Standardization& standardization) {
  task.validate();
  if (!(lambda_theta >= 0.0)) throw std::invalid_argument("cbq_fit: lambda_theta must be >= 0");
  Stage1 s1 = run_stage1(task, task.kernel_x, lambda_x, standardization);
  CbqPosterior post;
  post.lambda_theta = lambda_theta;
  post.standardization = standardization;
  Vector targets(task.size());
  Vector noise(task.size());
  for (Index t = 0; t < task.size(); ++t) {
    targets(t) = s1.mean[static_cast<std::size_t>(t)];
    noise(t) = lambda_theta + s1.var[static_cast<std::size_t>(t)];
  }
  try {
    post.stage2 = GpPosterior::fit(task.kernel_theta, Dataset::with_noise(task.thetas, targets, noise));
  } catch (const SingularMatrixError& e) {
    throw SingularMatrixError(std::string("cbq stage 2: ") + e.what(), e.condition_estimate());
  }
  post.stage1_mean = std::move(s1.mean);
  post.stage1_var = std::move(s1.var);
  post.stage1_weights = std::move(s1.weights);
  return post;
}

CbqPrediction cbq_predict(const CbqPosterior& post, PointView theta) {
  if (!post.stage2) throw std::invalid_argument("cbq_predict: posterior not fitted");
  const GpPosterior& gp = *post.stage2;
  const Vector k = kernel_row(gp.spec(), theta, gp.data().inputs);
  const Vector w = gp.solve(k);
  const Standardization& st = post.standardization;
  CbqPrediction out;
  out.mean = st.shift + st.scale * w.dot(gp.data().targets);
  out.variance = st.scale * st.scale * gp.predict_var(theta);
  double total = 0.0;
  out.weights.resize(post.stage1_weights.size());
  for (std::size_t t = 0; t < post.stage1_weights.size(); ++t) {
    out.weights[t] = w(static_cast<Index>(t)) * post.stage1_weights[t];
    total += out.weights[t].sum();
  }
  out.offset = st.shift * (1.0 - total);
  return out;
}

std::vector<std::vector<int>> monomial_exponents(Index dim, int degree) {
  std::vector<std::vector<int>> out;
  std::vector<int> current(static_cast<std::size_t>(dim), 0);
  for (int total = 0; total <= degree; ++total) {
    std::function<void(Index, int)> rec = [&](Index j, int remaining) {
      if (j == dim - 1) {
        current[static_cast<std::size_t>(j)] = remaining;
        out.push_back(current);
        return;
      }
      for (int e = remaining; e >= 0; --e) {
        current[static_cast<std::size_t>(j)] = e;
        rec(j + 1, remaining - e);
      }
    };
    rec(0, total);
  }
  return out;
}

Matrix polynomial_design(const PointSet& thetas, const std::vector<std::vector<int>>& exponents) {
  Matrix out(thetas.rows(), static_cast<Index>(exponents.size()));
  for (Index i = 0; i < thetas.rows(); ++i)
    for (std::size_t c = 0; c < exponents.size(); ++c) {
      double v = 1.0;
      for (Index j = 0; j < thetas.cols(); ++j) v *= std::pow(thetas(i, j), exponents[c][static_cast<std::size_t>(j)]);
      out(i, static_cast<Index>(c)) = v;
    }
  return out;
}

double PolynomialModel::predict(PointView theta) const {
  PointSet row(1, static_cast<Index>(theta.size()));
  for (std::size_t j = 0; j < theta.size(); ++j) row(0, static_cast<Index>(j)) = theta[j];
  return (polynomial_design(row, exponents) * coeffs)(0);
}

PolynomialModel lsmc_fit(const PointSet& thetas, const Vector& targets, int degree) {
  if (degree < 0) throw std::invalid_argument("lsmc_fit: degree must be >= 0");
  if (targets.size() != thetas.rows()) throw ShapeError("lsmc_fit: target count differs from theta count");
  PolynomialModel model;
  model.degree = degree;
  model.exponents = monomial_exponents(thetas.cols(), degree);
  const Matrix design = polynomial_design(thetas, model.exponents);
  if (design.rows() <= design.cols())
    throw std::invalid_argument("lsmc_fit: need more thetas than monomials");
  Eigen::ColPivHouseholderQR<Matrix> qr(design);
  if (qr.rank() < design.cols()) throw SingularMatrixError("lsmc_fit: rank-deficient design", 1.0 / qr.maxPivot());
  model.coeffs = qr.solve(targets);
  return model;
}

int select_lsmc_degree(const PointSet& train_thetas, const Vector& train_targets, const PointSet& val_thetas,
                       const Vector& val_targets, const std::vector<int>& degrees) {
  int best = -1;
  double best_rmse = std::numeric_limits<double>::infinity();
  for (int q : degrees) {
    PolynomialModel model;
    try {
      model = lsmc_fit(train_thetas, train_targets, q);
    } catch (const std::exception&) {
      continue;
    }
    double se = 0.0;
    for (Index i = 0; i < val_thetas.rows(); ++i) {
      const double r = model.predict(point(val_thetas, i)) - val_targets(i);
      se += r * r;
    }
    const double rmse = std::sqrt(se / static_cast<double>(val_thetas.rows()));
    if (rmse < best_rmse) {
      best_rmse = rmse;
      best = q;
    }
  }
  if (best < 0) throw std::invalid_argument("select_lsmc_degree: no degree could be fitted");
  return best;
}

double KernelRidgeModel::predict(PointView theta) const {
  return kernel_row(kernel, theta, thetas).dot(solution);
}

KernelRidgeModel klsmc_fit(const PointSet& thetas, const Vector& targets, const KernelSpec& kernel, double ridge) {
  if (!(ridge >= 0.0)) throw std::invalid_argument("klsmc_fit: ridge must be >= 0");
  if (targets.size() != thetas.rows()) throw ShapeError("klsmc_fit: target count differs from theta count");
  Matrix k = gram(kernel, thetas);
  k.diagonal().array() += ridge;
  const Factorization fact = factorize(k, JitterPolicy::none(), "klsmc_fit");
  return {kernel, thetas, fact.llt.solve(targets)};
}

Vector monte_carlo_means(const ConditionalTask& task) {
  Vector out(task.size());
  for (Index t = 0; t < task.size(); ++t) out(t) = task.fvals[static_cast<std::size_t>(t)].mean();
  return out;
}

GridSelection select_hyperparameters(const KernelSpec& base, const PointSet& inputs, const Vector& targets,
                                     const Vector& base_noise, const std::vector<double>& amplitudes,
                                     const std::vector<double>& lengthscales, const std::vector<double>& lambdas) {
  if (amplitudes.empty() || lengthscales.empty() || lambdas.empty())
    throw std::invalid_argument("select_hyperparameters: empty grid");
  GridSelection best;
  best.log_likelihood = -std::numeric_limits<double>::infinity();
  for (double a : amplitudes)
    for (double l : lengthscales)
      for (double lam : lambdas) {
        KernelSpec k = base.with_amplitude(a);
        if (k.uses_lengthscale()) k = k.with_lengthscale(l);
        const Vector noise = base_noise.array() + lam;
        double lml = -std::numeric_limits<double>::infinity();
        try {
          lml = log_marginal_likelihood(k, Dataset::with_noise(inputs, targets, noise));
        } catch (const SingularMatrixError&) {
        }
        best.all_log_likelihoods.push_back(lml);
        if (lml > best.log_likelihood) {
          best.amplitude = a;
          best.lengthscale = l;
          best.lambda = lam;
          best.log_likelihood = lml;
        }
      }
  if (!std::isfinite(best.log_likelihood)) throw SingularMatrixError("select_hyperparameters: no grid point factorized",
                                                                      std::numeric_limits<double>::infinity());
  return best;
}

CbqHyperparameters empirical_bayes_grid(const ConditionalTask& task, const CbqGrids& grids,
                                        const Standardization& standardization) {
  task.validate();
  const Vector f0 = (task.fvals.front().array() - standardization.shift) / standardization.scale;
  CbqHyperparameters out;
  out.stage1 = select_hyperparameters(task.kernel_x, task.samples.front(), f0, Vector::Zero(f0.size()),
                                      grids.amplitudes, grids.lengthscales, {0.0});
  out.kernel_x = task.kernel_x.with_amplitude(out.stage1.amplitude);
  if (out.kernel_x.uses_lengthscale()) out.kernel_x = out.kernel_x.with_lengthscale(out.stage1.lengthscale);

  const Stage1 s1 = run_stage1(task, out.kernel_x, 0.0, standardization);
  Vector targets(task.size());
  Vector var(task.size());
  for (Index t = 0; t < task.size(); ++t) {
    targets(t) = s1.mean[static_cast<std::size_t>(t)];
    var(t) = s1.var[static_cast<std::size_t>(t)];
  }
  out.stage2 = select_hyperparameters(task.kernel_theta, task.thetas, targets, var, grids.amplitudes,
                                      grids.lengthscales, grids.lambdas);
  out.kernel_theta = task.kernel_theta.with_amplitude(out.stage2.amplitude);
  if (out.kernel_theta.uses_lengthscale()) out.kernel_theta = out.kernel_theta.with_lengthscale(out.stage2.lengthscale);
  out.lambda_theta = out.stage2.lambda;
  return out;
}

}  // namespace kdisc

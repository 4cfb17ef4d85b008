#pragma once

#include "kdisc/gp.hpp"
#include "kdisc/kernels.hpp"
#include "kdisc/mmd.hpp"
#include "kdisc/types.hpp"

#include <functional>
#include <variant>

namespace kdisc {

struct GaussianMeasure {
  Vector mean;
  Matrix cov;
};

// Unnormalized Lebesgue measure on [0, T].
struct LebesgueInterval {
  double T = 1.0;
};

// Uniform probability measure on the box [lo, hi].
struct UniformBox {
  Vector lo;
  Vector hi;
};

using Measure = std::variant<GaussianMeasure, LebesgueInterval, UniformBox>;

// A kernel/measure pair with a closed-form mean embedding. Supported pairs:
// Gaussian kernel with GaussianMeasure or UniformBox, Brownian kernel with
// LebesgueInterval. Anything else throws UnsupportedEmbeddingError.
class Embedding {
 public:
  Embedding(KernelSpec kernel, Measure measure);

  const KernelSpec& kernel() const noexcept { return kernel_; }
  const Measure& measure() const noexcept { return measure_; }
  Index dim() const noexcept;

  double eval(PointView x) const;
  Vector eval(const PointSet& xs) const;
  double initial_error() const;

  Embedding with_kernel(const KernelSpec& kernel) const { return Embedding(kernel, measure_); }

 private:
  KernelSpec kernel_;
  Measure measure_;
  // Cached for the Gaussian/Gaussian pair.
  Matrix shifted_inv_;
  double scale_ = 0.0;
};

inline double kme_eval(const Embedding& emb, PointView x) { return emb.eval(x); }
inline double kme_initial_error(const Embedding& emb) { return emb.initial_error(); }

// Sample average of k(x, draw). For tests only; never substituted for a closed form.
double monte_carlo_kme(const KernelSpec& kernel, const PointSet& draws, PointView x);
// Sample average of k(draw_i, draw_j) over i != j.
double monte_carlo_initial_error(const KernelSpec& kernel, const PointSet& draws);

struct QuadratureRule {
  PointSet nodes;
  Vector weights;

  double apply(const Vector& fvals) const;
};

struct BqResult {
  double mean = 0.0;
  double variance = 0.0;
  QuadratureRule rule;
  double jitter = 0.0;
};

// Posterior mean and variance of the integral under a zero-mean GP prior with
// the embedding's kernel. lambda is an explicit nugget added to the Gram matrix.
BqResult bq_posterior(const Embedding& emb, const PointSet& nodes, const Vector& fvals, double lambda = 0.0,
                      const JitterPolicy& policy = JitterPolicy::standard());

// Weights w = c(u, u)^-1 mu_c(u) minimizing the MMD_c between the base measure
// and the weighted node set.
Vector ow_weights(const Embedding& emb_c, const PointSet& base_nodes,
                  const JitterPolicy& policy = JitterPolicy::none());

// MMD_c^2 between the base measure and sum_n w_n delta_{u_n}, as the quadratic form
// initial_error - 2 w.mu + w.Cw.
double weighted_embedding_mmd2(const Embedding& emb_c, const PointSet& base_nodes, const Vector& weights);

using Generator = std::function<Vector(PointView)>;

PointSet apply_generator(const Generator& generator, const PointSet& base_nodes);

// Weighted MMD^2 between the generator's OW-weighted push-forward and Q.
double ow_mmd2(const KernelSpec& kernel_k, const Embedding& emb_c, const Generator& generator,
               const PointSet& base_nodes, const EmpiricalMeasure& q,
               const JitterPolicy& policy = JitterPolicy::none());
double ow_mmd2(const KernelSpec& kernel_k, const Embedding& emb_c, const Generator& generator,
               const PointSet& base_nodes, const EmpiricalMeasure& q, double qq_mean,
               const JitterPolicy& policy = JitterPolicy::none());

}  // namespace kdisc

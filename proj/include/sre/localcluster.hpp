#pragma once

#include "sre/numerics.hpp"

#include <functional>

namespace sre {

/// Piecewise-constant intercept surface: ordered levels λ_1 < … < λ_G,
/// per-area class labels Z_k ∈ {1..G}, and the penalty δ pulling labels
/// towards the middle class G* = (G + 1) / 2.
struct ClusterState {
  int G = 5;
  Vec lambda;
  IVec Z;  // 1-based class labels
  double delta = 1.0;
  double delta_max = 100.0;

  double middle() const { return 0.5 * (G + 1); }

  // Throws InputError unless G is odd and ≥ 3, λ is strictly increasing,
  // every label is in range and δ ∈ [0, delta_max].
  void validate() const;
};

/// f(z) = exp(−δ (z − G*)²) / Σ_r exp(−δ (r − G*)²).
double allocation_prior(int z, double delta, int G);
Vec allocation_prior_vector(double delta, int G);

// Σ_k log f(Z_k | δ).
double allocation_log_prior(const IVec& Z, double delta, int G);

// log f(z | δ) for z = 1..G.
Vec allocation_log_prior_vector(double delta, int G);

// Categorical draw with log-probabilities log_prior + loglik_by_class, up to
// a constant; returns a 1-based class.
int draw_allocation(const Vec& log_prior, const Vec& loglik_by_class, RngStream& rng);

/// Draws Z_k with probability ∝ exp(loglik_by_class[z]) f(z | δ).
/// `loglik_by_class` is indexed 0..G−1 for classes 1..G.
int sample_allocation(Index k, const ClusterState& state, const Vec& loglik_by_class,
                      RngStream& rng);

struct MhStep {
  double value = 0.0;
  bool accepted = false;
};

// Folds x back into (lo, hi) by reflection at each finite bound.
double reflect_into(double x, double lo, double hi);

/// Metropolis update of λ_i (1-based) under the flat ordered prior. The
/// proposal is a Gaussian random walk reflected at λ_{i−1} and λ_{i+1}, which
/// keeps it symmetric. `class_loglik(v)` is the log-likelihood of the areas
/// in class i with λ_i = v.
MhStep sample_lambda(int i, const ClusterState& state,
                     const std::function<double(double)>& class_loglik, double proposal_sd,
                     RngStream& rng);

/// Metropolis update of δ targeting Π_k f(Z_k | δ) on [0, delta_max] with a
/// reflecting random walk.
MhStep sample_delta(const ClusterState& state, double proposal_sd, RngStream& rng);

/// Starting λ at the (j − 0.5)/G quantiles of `log_risk`, spread apart if
/// quantiles tie, and Z at the nearest level.
ClusterState initial_clusters(const Vec& log_risk, int G, double delta = 1.0);

}  // namespace sre

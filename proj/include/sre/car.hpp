#pragma once

#include "sre/graph.hpp"
#include "sre/numerics.hpp"

namespace sre {

/// Smooth component of the random effects under the Leroux CAR prior.
struct CarState {
  Vec theta;
  double rho = 0.5;
  double tau2 = 1.0;

  void validate() const;
};

/// Q(ρ) = ρ (D − W) + (1 − ρ) I. The prior on θ is N(0, τ² Q(ρ)⁻¹).
Mat leroux_precision(const AreaGraph& graph, double rho);

struct Conditional {
  double mean = 0.0;
  double variance = 0.0;
};

/// θ_k | θ_{-k} under the Leroux prior. Throws InputError for the improper
/// case ρ = 1 with an isolated area.
Conditional full_conditional_theta(Index k, const CarState& state, const AreaGraph& graph);

double partial_correlation(const AreaGraph& graph, double rho, Index k, Index i);

/// θᵀ Q(ρ) θ = ρ Σ_{k~i} (θ_k − θ_i)² + (1 − ρ) Σ θ_k², in O(edges).
double leroux_quadratic_form(const AreaGraph& graph, const Vec& theta, double rho);

/// Conjugate draw τ² ~ Inverse-Gamma(a + n/2, b + θᵀQ(ρ)θ / 2).
double sample_tau2(const Vec& theta, double rho, const AreaGraph& graph, double a, double b,
                   RngStream& rng);

/// log det Q(ρ) from the spectrum of D − W, computed once per graph:
/// Q(ρ) shares eigenvectors with the Laplacian, so each evaluation is O(n).
class LerouxLogDet {
 public:
  explicit LerouxLogDet(const AreaGraph& graph);

  double operator()(double rho) const;
  const Vec& laplacian_eigenvalues() const { return eigenvalues_; }

 private:
  Vec eigenvalues_;
};

// Reference route: 2 Σ log diag(chol(Q(ρ))). O(n³).
double leroux_log_det_cholesky(const AreaGraph& graph, double rho);

/// One draw θ ~ N(0, τ² Q(ρ)⁻¹); requires ρ < 1 or a graph without
/// zero-eigenvalue directions.
Vec sample_leroux(const AreaGraph& graph, double rho, double tau2, RngStream& rng);

}  // namespace sre

#pragma once

#include "sre/graph.hpp"
#include "sre/mcmc.hpp"
#include "sre/model.hpp"

#include <string>
#include <vector>

namespace sre {

/// Quasi-Poisson fit: Poisson MLE with Pearson-scaled standard errors.
struct GlmFit {
  std::vector<std::string> names;
  Vec coefficients;
  Vec standard_errors;  // already scaled by sqrt(dispersion)
  Vec lower95, upper95;
  Mat covariance;       // unscaled inverse Fisher information
  double dispersion = 1.0;
  double deviance = 0.0;
  int iterations = 0;
};

struct IrlsOptions {
  int max_iterations = 100;
  double tolerance = 1e-10;  // relative deviance change
};

/// Poisson log-link IRLS on an arbitrary design with a known offset.
GlmFit fit_poisson_glm(const Mat& design, const Vec& y, const Vec& offset,
                       std::vector<std::string> names = {}, const IrlsOptions& options = {});

/// Model-GLM: design [X | exposure_mean], offset log E. The last coefficient
/// is the pollution effect α.
GlmFit fit_glm(const HealthDataset& data, const Vec& exposure_mean, const IrlsOptions& options = {});

struct HhBasis {
  Mat vectors;      // n × q, orthonormal, orthogonal to the design
  Vec eigenvalues;  // non-increasing
};

/// Leading q eigenvectors of P W P with P = I − X (XᵀX)⁻¹ Xᵀ. Each column is
/// sign-normalised so its first non-negligible entry is positive.
HhBasis hh_basis(const Mat& X, const AreaGraph& graph, Index q);

/// Model-HH: Poisson fit with φ = M γ over the basis of [X | exposure_mean].
ChainTrace fit_hh(const HealthDataset& data, const Vec& exposure_mean, const AreaGraph& graph,
                  Index q, const FitConfig& config, int chain_id = 0);

}  // namespace sre

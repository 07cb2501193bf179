#pragma once

#include "sre/types.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace sre {

/// Observed counts, expected counts and covariates for n areas.
///
/// The first column of `X` is the intercept (all ones); `covariate_names`
/// labels every column of `X`, including "(Intercept)".
struct HealthDataset {
  std::vector<std::string> area_ids;
  Vec Y;  // non-negative integers held as doubles
  Vec E;  // strictly positive
  Mat X;
  std::vector<std::string> covariate_names;

  Index size() const { return Y.size(); }
  Index num_covariates() const { return X.cols(); }
  Vec smr() const { return Y.cwiseQuotient(E); }

  // Throws InputError if any invariant fails.
  void validate() const;
};

// Builds a dataset with an intercept-only design when `covariates` is empty.
HealthDataset make_dataset(std::vector<std::string> area_ids, Vec Y, Vec E,
                           const Mat& covariates = Mat(),
                           std::vector<std::string> covariate_names = {});

/// Within-area concentrations and population weights, flattened over areas.
///
/// Cells of area k occupy [offset(k), offset(k+1)) of `concentration()` and
/// `weight()`.
class ExposureSet {
 public:
  ExposureSet() = default;

  // Weights must already sum to one per area (to 1e-10).
  ExposureSet(std::vector<Index> offsets, Vec concentration, Vec weight);

  // Rescales each area's weights to sum to one before validating.
  static ExposureSet normalised(std::vector<Index> offsets, Vec concentration, Vec raw_weight);

  // One cell of weight one per area.
  static ExposureSet from_points(const Vec& values);

  Index size() const { return static_cast<Index>(offsets_.size()) - 1; }
  Index cells(Index k) const { return offsets_[k + 1] - offsets_[k]; }
  Index offset(Index k) const { return offsets_[k]; }
  Index total_cells() const { return concentration_.size(); }
  bool single_cell() const { return total_cells() == size(); }

  auto concentrations(Index k) const { return concentration_.segment(offsets_[k], cells(k)); }
  auto weights(Index k) const { return weight_.segment(offsets_[k], cells(k)); }
  const Vec& concentration() const { return concentration_; }
  const Vec& weight() const { return weight_; }
  const std::vector<Index>& offsets() const { return offsets_; }

  Vec weighted_means() const;

 private:
  std::vector<Index> offsets_{0};
  Vec concentration_;
  Vec weight_;
};

enum class ExposureLink { Ecological, Aggregate };

const char* to_string(ExposureLink link);

struct ModelParams {
  Vec beta;
  double alpha = 0.0;
  Vec phi;
  ExposureLink link = ExposureLink::Ecological;
};

/// Population-weighted mean concentration Σ p_i w_i.
double weighted_mean_exposure(const Eigen::Ref<const Vec>& w, const Eigen::Ref<const Vec>& p);

/// Population-weighted sample moment generating function Σ p_i exp(w_i α).
double aggregate_link(const Eigen::Ref<const Vec>& w, const Eigen::Ref<const Vec>& p, double alpha);

/// log Σ p_i exp(w_i α), evaluated with the largest exponent factored out.
double log_aggregate_link(const Eigen::Ref<const Vec>& w, const Eigen::Ref<const Vec>& p,
                          double alpha);

double log_relative_risk(const Eigen::Ref<const Eigen::RowVectorXd>& x_k, const ModelParams& params,
                         double phi_k, const Eigen::Ref<const Vec>& w_k,
                         const Eigen::Ref<const Vec>& p_k);

double area_relative_risk(const Eigen::Ref<const Eigen::RowVectorXd>& x_k, const ModelParams& params,
                          double phi_k, const Eigen::Ref<const Vec>& w_k,
                          const Eigen::Ref<const Vec>& p_k);

// log Poisson(y | exp(log_mean)) with the log(y!) term supplied.
inline double poisson_log_density(double y, double log_mean, double log_y_factorial) {
  return y * log_mean - std::exp(log_mean) - log_y_factorial;
}

/// Full Poisson log-likelihood, log(Y_k!) constants included.
double log_likelihood(const HealthDataset& data, const ExposureSet& exposures,
                      const ModelParams& params);

inline double relative_risk_for_increment(double alpha, double delta) {
  return std::exp(alpha * delta);
}

/// Slope inflation 0.5 b α² of the ecological link when within-area exposure
/// is Gaussian with variance a + b μ.
inline double gaussian_bias_term(double b, double alpha) { return 0.5 * b * alpha * alpha; }

/// Per-area exposure contribution to the log linear predictor, vectorised over
/// every cell at once: α μ̂_k (ecological) or log g_k(α) (aggregate).
class ExposureTerms {
 public:
  explicit ExposureTerms(const ExposureSet& exposures);

  void log_terms(double alpha, ExposureLink link, Vec& out) const;

  // d/dα of log_terms: μ̂_k, or the exp(w α)-tilted weighted mean.
  void slopes(double alpha, ExposureLink link, Vec& out) const;

  const Vec& means() const { return means_; }
  Index size() const { return means_.size(); }

 private:
  void tilted_weights(double alpha, Eigen::ArrayXd& cell) const;

  const ExposureSet* exposures_;
  Vec means_;
  Vec max_, min_;                      // per area
  Eigen::ArrayXd from_max_, from_min_;  // per cell: w - max_k, w - min_k
  Eigen::ArrayXd weight_;
  mutable Eigen::ArrayXd scratch_;
};

}  // namespace sre

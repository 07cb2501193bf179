#include "sre/model.hpp"

#include <cmath>
#include <unordered_set>

namespace sre {

namespace {

constexpr double kWeightTol = 1e-10;

}  // namespace

void HealthDataset::validate() const {
  const Index n = Y.size();
  if (n == 0) throw InputError("dataset has no areas");
  if (E.size() != n || X.rows() != n) throw InputError("dataset: Y, E and X row counts differ");
  if (!area_ids.empty() && static_cast<Index>(area_ids.size()) != n) {
    throw InputError("dataset: area id count differs from Y");
  }
  std::unordered_set<std::string> seen;
  for (const auto& id : area_ids) {
    if (!seen.insert(id).second) throw InputError("dataset: duplicate area id '" + id + "'");
  }
  if (X.cols() < 1) throw InputError("dataset: design matrix needs an intercept column");
  if (static_cast<Index>(covariate_names.size()) != X.cols()) {
    throw InputError("dataset: covariate_names must label every column of X");
  }
  for (Index k = 0; k < n; ++k) {
    if (!(Y(k) >= 0) || Y(k) != std::floor(Y(k))) {
      throw InputError("dataset: Y must be non-negative integers (area " + std::to_string(k) + ")");
    }
    if (!(E(k) > 0) || !std::isfinite(E(k))) {
      throw InputError("dataset: E must be positive (area " + std::to_string(k) + ")");
    }
    if (X(k, 0) != 1.0) throw InputError("dataset: first column of X must be all ones");
    if (!X.row(k).allFinite()) throw InputError("dataset: non-finite covariate");
  }
}

HealthDataset make_dataset(std::vector<std::string> area_ids, Vec Y, Vec E, const Mat& covariates,
                           std::vector<std::string> covariate_names) {
  HealthDataset d;
  const Index n = Y.size();
  if (area_ids.empty()) {
    for (Index k = 0; k < n; ++k) area_ids.push_back(std::to_string(k + 1));
  }
  d.area_ids = std::move(area_ids);
  d.Y = std::move(Y);
  d.E = std::move(E);
  const Index extra = covariates.size() == 0 ? 0 : covariates.cols();
  d.X.resize(n, 1 + extra);
  d.X.col(0).setOnes();
  if (extra > 0) {
    if (covariates.rows() != n) throw InputError("make_dataset: covariate rows differ from Y");
    d.X.rightCols(extra) = covariates;
  }
  d.covariate_names.push_back("(Intercept)");
  for (Index j = 0; j < extra; ++j) {
    d.covariate_names.push_back(j < static_cast<Index>(covariate_names.size())
                                    ? covariate_names[j]
                                    : "x" + std::to_string(j + 1));
  }
  d.validate();
  return d;
}

ExposureSet::ExposureSet(std::vector<Index> offsets, Vec concentration, Vec weight)
    : offsets_(std::move(offsets)),
      concentration_(std::move(concentration)),
      weight_(std::move(weight)) {
  if (offsets_.size() < 2 || offsets_.front() != 0) {
    throw InputError("ExposureSet: offsets must start at 0 and cover at least one area");
  }
  if (offsets_.back() != concentration_.size() || weight_.size() != concentration_.size()) {
    throw InputError("ExposureSet: offsets do not match the number of cells");
  }
  for (Index k = 0; k < size(); ++k) {
    if (cells(k) < 1) throw InputError("ExposureSet: area " + std::to_string(k) + " has no cells");
    auto p = weights(k);
    if ((p.array() < 0).any()) throw InputError("ExposureSet: negative population weight");
    if (std::abs(p.sum() - 1.0) > kWeightTol) {
      throw InputError("ExposureSet: weights of area " + std::to_string(k) + " do not sum to 1");
    }
    if (!concentrations(k).allFinite()) throw InputError("ExposureSet: non-finite concentration");
  }
}

ExposureSet ExposureSet::normalised(std::vector<Index> offsets, Vec concentration, Vec raw_weight) {
  if (offsets.size() < 2 || offsets.back() != raw_weight.size()) {
    throw InputError("ExposureSet: offsets do not match the number of cells");
  }
  for (std::size_t k = 0; k + 1 < offsets.size(); ++k) {
    auto seg = raw_weight.segment(offsets[k], offsets[k + 1] - offsets[k]);
    const double total = seg.sum();
    if (!(total > 0)) {
      throw InputError("ExposureSet: weights of area " + std::to_string(k) + " sum to zero");
    }
    seg /= total;
  }
  return ExposureSet(std::move(offsets), std::move(concentration), std::move(raw_weight));
}

ExposureSet ExposureSet::from_points(const Vec& values) {
  std::vector<Index> offsets(static_cast<std::size_t>(values.size()) + 1);
  for (Index k = 0; k <= values.size(); ++k) offsets[k] = k;
  return ExposureSet(std::move(offsets), values, Vec::Ones(values.size()));
}

Vec ExposureSet::weighted_means() const {
  Vec m(size());
  for (Index k = 0; k < size(); ++k) m(k) = weighted_mean_exposure(concentrations(k), weights(k));
  return m;
}

const char* to_string(ExposureLink link) {
  return link == ExposureLink::Ecological ? "ecological" : "aggregate";
}

double weighted_mean_exposure(const Eigen::Ref<const Vec>& w, const Eigen::Ref<const Vec>& p) {
  if (w.size() != p.size() || w.size() == 0) {
    throw InputError("weighted_mean_exposure: need matching, non-empty vectors");
  }
  if (std::abs(p.sum() - 1.0) > kWeightTol) {
    throw InputError("weighted_mean_exposure: weights do not sum to 1");
  }
  double s = 0.0;
  for (Index i = 0; i < w.size(); ++i) s += p(i) * w(i);
  return s;
}

double log_aggregate_link(const Eigen::Ref<const Vec>& w, const Eigen::Ref<const Vec>& p,
                          double alpha) {
  if (w.size() != p.size() || w.size() == 0) {
    throw InputError("aggregate_link: need matching, non-empty vectors");
  }
  if (std::abs(p.sum() - 1.0) > kWeightTol) throw InputError("aggregate_link: weights do not sum to 1");
  const double top = alpha >= 0 ? w.maxCoeff() : w.minCoeff();
  double s = 0.0;
  for (Index i = 0; i < w.size(); ++i) s += p(i) * std::exp(alpha * (w(i) - top));
  return alpha * top + std::log(s);
}

double aggregate_link(const Eigen::Ref<const Vec>& w, const Eigen::Ref<const Vec>& p, double alpha) {
  return std::exp(log_aggregate_link(w, p, alpha));
}

double log_relative_risk(const Eigen::Ref<const Eigen::RowVectorXd>& x_k, const ModelParams& params,
                         double phi_k, const Eigen::Ref<const Vec>& w_k,
                         const Eigen::Ref<const Vec>& p_k) {
  if (x_k.size() != params.beta.size()) throw InputError("log_relative_risk: beta/x size mismatch");
  const double fixed = x_k.dot(params.beta) + phi_k;
  if (params.link == ExposureLink::Ecological) {
    return fixed + weighted_mean_exposure(w_k, p_k) * params.alpha;
  }
  return fixed + log_aggregate_link(w_k, p_k, params.alpha);
}

double area_relative_risk(const Eigen::Ref<const Eigen::RowVectorXd>& x_k, const ModelParams& params,
                          double phi_k, const Eigen::Ref<const Vec>& w_k,
                          const Eigen::Ref<const Vec>& p_k) {
  return std::exp(log_relative_risk(x_k, params, phi_k, w_k, p_k));
}

double log_likelihood(const HealthDataset& data, const ExposureSet& exposures,
                      const ModelParams& params) {
  const Index n = data.size();
  if (exposures.size() != n) throw InputError("log_likelihood: exposure set size mismatch");
  if (params.phi.size() != n) throw InputError("log_likelihood: phi size mismatch");
  double total = 0.0;
  for (Index k = 0; k < n; ++k) {
    const double log_r = log_relative_risk(data.X.row(k), params, params.phi(k),
                                           exposures.concentrations(k), exposures.weights(k));
    total += poisson_log_density(data.Y(k), std::log(data.E(k)) + log_r, std::lgamma(data.Y(k) + 1.0));
  }
  return total;
}

ExposureTerms::ExposureTerms(const ExposureSet& exposures)
    : exposures_(&exposures), means_(exposures.weighted_means()) {
  const Index n = exposures.size();
  max_.resize(n);
  min_.resize(n);
  from_max_.resize(exposures.total_cells());
  from_min_.resize(exposures.total_cells());
  for (Index k = 0; k < n; ++k) {
    auto w = exposures.concentrations(k);
    max_(k) = w.maxCoeff();
    min_(k) = w.minCoeff();
    from_max_.segment(exposures.offset(k), w.size()) = w.array() - max_(k);
    from_min_.segment(exposures.offset(k), w.size()) = w.array() - min_(k);
  }
  weight_ = exposures.weight().array();
  scratch_.resize(exposures.total_cells());
}

void ExposureTerms::tilted_weights(double alpha, Eigen::ArrayXd& cell) const {
  // p_i exp(α (w_i - w*)), with w* the cell maximising α w.
  cell = weight_ * (alpha * (alpha >= 0 ? from_max_ : from_min_)).exp();
}

void ExposureTerms::log_terms(double alpha, ExposureLink link, Vec& out) const {
  const Index n = size();
  out.resize(n);
  if (link == ExposureLink::Ecological) {
    out = alpha * means_;
    return;
  }
  tilted_weights(alpha, scratch_);
  const Vec& top = alpha >= 0 ? max_ : min_;
  const auto& offsets = exposures_->offsets();
  for (Index k = 0; k < n; ++k) {
    const double s = scratch_.segment(offsets[k], offsets[k + 1] - offsets[k]).sum();
    out(k) = alpha * top(k) + std::log(s);
  }
}

void ExposureTerms::slopes(double alpha, ExposureLink link, Vec& out) const {
  const Index n = size();
  if (link == ExposureLink::Ecological) {
    out = means_;
    return;
  }
  out.resize(n);
  tilted_weights(alpha, scratch_);
  const auto& offsets = exposures_->offsets();
  const Vec& w = exposures_->concentration();
  for (Index k = 0; k < n; ++k) {
    const Index a = offsets[k], len = offsets[k + 1] - offsets[k];
    const double s = scratch_.segment(a, len).sum();
    out(k) = (scratch_.segment(a, len) * w.segment(a, len).array()).sum() / s;
  }
}

}  // namespace sre

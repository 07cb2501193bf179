#include "sre/comparators.hpp"
#include "sre/numerics.hpp"

#include <cmath>

namespace sre {

namespace {

double poisson_deviance(const Vec& y, const Vec& mu) {
  double dev = 0.0;
  for (Index i = 0; i < y.size(); ++i) {
    const double term = y(i) > 0.0 ? y(i) * std::log(y(i) / mu(i)) : 0.0;
    dev += 2.0 * (term - (y(i) - mu(i)));
  }
  return dev;
}

}  // namespace

GlmFit fit_poisson_glm(const Mat& design, const Vec& y, const Vec& offset, std::vector<std::string> names,
                       const IrlsOptions& options) {
  const Index n = design.rows();
  const Index p = design.cols();
  if (y.size() != n || offset.size() != n) throw InputError("fit_poisson_glm: dimension mismatch");
  if (p == 0) throw InputError("fit_poisson_glm: empty design");
  if (n <= p) throw InputError("fit_poisson_glm: need more observations than coefficients");
  if (!design.allFinite() || !offset.allFinite()) throw InputError("fit_poisson_glm: non-finite input");
  if ((y.array() < 0.0).any()) throw InputError("fit_poisson_glm: negative counts");
  if (names.empty()) {
    for (Index j = 0; j < p; ++j) names.push_back("x" + std::to_string(j));
  }
  if (static_cast<Index>(names.size()) != p) throw InputError("fit_poisson_glm: wrong number of names");

  Eigen::ColPivHouseholderQR<Mat> rank_check(design);
  rank_check.setThreshold(1e-10);
  if (rank_check.rank() < p) throw InputError("fit_poisson_glm: design matrix is rank deficient");

  Vec mu = y.array() + 0.1;
  Vec eta = mu.array().log().matrix();
  Vec beta = Vec::Zero(p);
  double dev = poisson_deviance(y, mu);
  int iter = 0;
  bool converged = false;
  while (iter < options.max_iterations) {
    ++iter;
    const Vec z = (eta - offset).array() + (y - mu).array() / mu.array();
    const Vec sw = mu.array().sqrt();
    const Mat wx = sw.asDiagonal() * design;
    beta = wx.colPivHouseholderQr().solve(Vec(sw.cwiseProduct(z)));
    eta = design * beta + offset;
    mu = eta.array().exp();
    if (!mu.allFinite()) throw FitError("fit_poisson_glm: IRLS diverged");
    const double dev_new = poisson_deviance(y, mu);
    const bool done = std::abs(dev_new - dev) / (std::abs(dev_new) + 0.1) < options.tolerance;
    dev = dev_new;
    if (done) {
      converged = true;
      break;
    }
  }
  if (!converged) throw FitError("fit_poisson_glm: IRLS did not converge");

  GlmFit fit;
  fit.names = std::move(names);
  fit.coefficients = beta;
  fit.iterations = iter;
  fit.deviance = dev;
  const Mat info = design.transpose() * mu.asDiagonal() * design;
  fit.covariance = info.ldlt().solve(Mat::Identity(p, p));
  const double pearson = ((y - mu).array().square() / mu.array()).sum();
  fit.dispersion = pearson / static_cast<double>(n - p);
  fit.standard_errors = (fit.covariance.diagonal().array() * fit.dispersion).sqrt();
  fit.lower95 = beta - 1.96 * fit.standard_errors;
  fit.upper95 = beta + 1.96 * fit.standard_errors;
  return fit;
}

GlmFit fit_glm(const HealthDataset& data, const Vec& exposure_mean, const IrlsOptions& options) {
  data.validate();
  if (exposure_mean.size() != data.size()) throw InputError("fit_glm: exposure_mean has wrong length");
  Mat design(data.size(), data.num_covariates() + 1);
  design << data.X, exposure_mean;
  auto names = data.covariate_names;
  names.push_back("alpha");
  return fit_poisson_glm(design, data.Y, data.E.array().log().matrix(), std::move(names), options);
}

HhBasis hh_basis(const Mat& X, const AreaGraph& graph, Index q) {
  const Index n = X.rows();
  const Index p = X.cols();
  if (graph.size() != n) throw InputError("hh_basis: graph size differs from X");
  if (q < 0 || q > n - p) throw InputError("hh_basis: q must lie in [0, n - p]");
  Eigen::ColPivHouseholderQR<Mat> qr(X);
  qr.setThreshold(1e-10);
  if (qr.rank() < p) throw InputError("hh_basis: XᵀX is singular");

  // P = I − U Uᵀ with U an orthonormal basis of col(X).
  const Mat u = Mat(qr.householderQ()).leftCols(p);
  const Mat w = graph.adjacency();
  const Mat wu = w * u;
  const Mat utwu = u.transpose() * wu;
  Mat pwp = w - u * wu.transpose() - wu * u.transpose() + u * utwu * u.transpose();
  pwp = 0.5 * (pwp + pwp.transpose());

  const SymEigen<double> eig = sym_eigen(pwp);
  HhBasis out;
  out.vectors = eig.vectors.leftCols(q);
  out.eigenvalues = eig.values.head(q);
  for (Index j = 0; j < q; ++j) {
    auto col = out.vectors.col(j);
    const double tol = 1e-8 * col.cwiseAbs().maxCoeff();
    for (Index i = 0; i < n; ++i) {
      if (std::abs(col(i)) > tol) {
        if (col(i) < 0.0) col = -col;
        break;
      }
    }
  }
  return out;
}

ChainTrace fit_hh(const HealthDataset& data, const Vec& exposure_mean, const AreaGraph& graph, Index q,
                  const FitConfig& config, int chain_id) {
  ModelSpec spec = ModelSpec::from_name("hh");
  spec.hh_q = q;
  return run_chain(data, ExposureSet::from_points(exposure_mean), graph, spec, config, chain_id);
}

}  // namespace sre

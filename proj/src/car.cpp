#include "sre/car.hpp"

#include <cmath>

namespace sre {

void CarState::validate() const {
  if (!(rho >= 0.0 && rho <= 1.0)) throw InputError("CarState: rho must lie in [0, 1]");
  if (!(tau2 > 0.0)) throw InputError("CarState: tau2 must be positive");
}

Mat leroux_precision(const AreaGraph& graph, double rho) {
  if (!(rho >= 0.0 && rho <= 1.0)) throw InputError("leroux_precision: rho must lie in [0, 1]");
  Mat q = rho * graph.laplacian();
  q.diagonal().array() += 1.0 - rho;
  return q;
}

Conditional full_conditional_theta(Index k, const CarState& state, const AreaGraph& graph) {
  const double denom = state.rho * static_cast<double>(graph.degree(k)) + 1.0 - state.rho;
  if (!(denom > 0.0)) {
    throw InputError("full_conditional_theta: improper conditional for isolated area " +
                     std::to_string(k) + " at rho = 1");
  }
  return {state.rho * graph.neighbour_sum(k, state.theta) / denom, state.tau2 / denom};
}

double partial_correlation(const AreaGraph& graph, double rho, Index k, Index i) {
  if (k == i) throw InputError("partial_correlation: k and i must differ");
  if (!graph.adjacent(k, i)) return 0.0;
  const double dk = rho * static_cast<double>(graph.degree(k)) + 1.0 - rho;
  const double di = rho * static_cast<double>(graph.degree(i)) + 1.0 - rho;
  return rho / std::sqrt(dk * di);
}

double leroux_quadratic_form(const AreaGraph& graph, const Vec& theta, double rho) {
  double edge_sum = 0.0;
  for (auto [a, b] : graph.edges()) {
    const double d = theta(a) - theta(b);
    edge_sum += d * d;
  }
  return rho * edge_sum + (1.0 - rho) * theta.squaredNorm();
}

double sample_tau2(const Vec& theta, double rho, const AreaGraph& graph, double a, double b,
                   RngStream& rng) {
  if (theta.size() != graph.size()) throw InputError("sample_tau2: theta has wrong length");
  const double quad = leroux_quadratic_form(graph, theta, rho);
  if (quad < 0.0) throw NumericalError("sample_tau2: negative quadratic form");
  const double shape = a + 0.5 * static_cast<double>(theta.size());
  const double scale = b + 0.5 * quad;
  return scale / rng.gamma(shape, 1.0);
}

LerouxLogDet::LerouxLogDet(const AreaGraph& graph) {
  Eigen::SelfAdjointEigenSolver<Mat> solver(graph.laplacian(), Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw NumericalError("LerouxLogDet: eigensolver did not converge");
  eigenvalues_ = solver.eigenvalues().cwiseMax(0.0);
}

double LerouxLogDet::operator()(double rho) const {
  return (rho * eigenvalues_.array() + (1.0 - rho)).log().sum();
}

double leroux_log_det_cholesky(const AreaGraph& graph, double rho) {
  return log_det_from_cholesky<double>(cholesky(leroux_precision(graph, rho)));
}

Vec sample_leroux(const AreaGraph& graph, double rho, double tau2, RngStream& rng) {
  // Q = L Lᵀ, θ = sqrt(τ²) L⁻ᵀ z has covariance τ² Q⁻¹.
  const Mat lower = cholesky(leroux_precision(graph, rho));
  const Vec z = rng.normal_vector(graph.size());
  return std::sqrt(tau2) * lower.transpose().triangularView<Eigen::Upper>().solve(z);
}

}  // namespace sre

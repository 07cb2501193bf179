#include "sre/localcluster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace sre {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double lower_bound_of(const ClusterState& s, int i) { return i > 1 ? s.lambda(i - 2) : -kInf; }
double upper_bound_of(const ClusterState& s, int i) { return i < s.G ? s.lambda(i) : kInf; }

}  // namespace

void ClusterState::validate() const {
  if (G < 3 || G % 2 == 0) throw InputError("ClusterState: G must be odd and at least 3");
  if (lambda.size() != G) throw InputError("ClusterState: lambda must have G entries");
  for (int i = 1; i < G; ++i) {
    if (!(lambda(i) > lambda(i - 1))) throw InputError("ClusterState: lambda must be strictly increasing");
  }
  if ((Z.array() < 1).any() || (Z.array() > G).any()) {
    throw InputError("ClusterState: allocation outside 1..G");
  }
  if (!(delta >= 0.0 && delta <= delta_max)) throw InputError("ClusterState: delta outside its support");
}

Vec allocation_prior_vector(double delta, int G) {
  if (G < 1) throw InputError("allocation_prior: G must be positive");
  if (!(delta >= 0.0)) throw InputError("allocation_prior: delta must be non-negative");
  const double mid = 0.5 * (G + 1);
  Vec log_w(G);
  for (int r = 1; r <= G; ++r) log_w(r - 1) = -delta * (r - mid) * (r - mid);
  // The middle class (or the two nearest it) has the largest weight, log 0 or
  // −δ/4, so the exponentials below never all underflow.
  const Vec w = (log_w.array() - log_w.maxCoeff()).exp();
  return w / w.sum();
}

double allocation_prior(int z, double delta, int G) {
  if (z < 1 || z > G) throw InputError("allocation_prior: z outside 1..G");
  return allocation_prior_vector(delta, G)(z - 1);
}

double allocation_log_prior(const IVec& Z, double delta, int G) {
  const double mid = 0.5 * (G + 1);
  double penalty = 0.0;
  for (Index k = 0; k < Z.size(); ++k) penalty += (Z(k) - mid) * (Z(k) - mid);
  double norm = 0.0;
  for (int r = 1; r <= G; ++r) norm += std::exp(-delta * (r - mid) * (r - mid));
  return -delta * penalty - static_cast<double>(Z.size()) * std::log(norm);
}

Vec allocation_log_prior_vector(double delta, int G) {
  const double mid = 0.5 * (G + 1);
  Vec log_w(G);
  for (int r = 1; r <= G; ++r) log_w(r - 1) = -delta * (r - mid) * (r - mid);
  const double top = log_w.maxCoeff();
  return log_w.array() - (top + std::log((log_w.array() - top).exp().sum()));
}

int draw_allocation(const Vec& log_prior, const Vec& loglik_by_class, RngStream& rng) {
  const Index G = log_prior.size();
  if (loglik_by_class.size() != G) throw InputError("sample_allocation: need one log-likelihood per class");
  Index top_class = 0;
  double top = -kInf;
  for (Index z = 0; z < G; ++z) {
    const double lp = loglik_by_class(z) + log_prior(z);
    if (lp > top || (z == 0 && !(lp < top))) {
      top = lp;
      top_class = z;
    }
  }
  if (top == kInf) return static_cast<int>(top_class) + 1;
  if (!std::isfinite(top)) {
    throw NumericalError("sample_allocation: every class has zero probability");
  }
  double total = 0.0;
  for (Index z = 0; z < G; ++z) total += std::exp(loglik_by_class(z) + log_prior(z) - top);
  double u = rng.uniform() * total;
  int last_positive = static_cast<int>(top_class) + 1;
  for (Index z = 0; z < G; ++z) {
    const double p = std::exp(loglik_by_class(z) + log_prior(z) - top);
    if (p > 0.0) last_positive = static_cast<int>(z) + 1;
    u -= p;
    if (u < 0.0) return static_cast<int>(z) + 1;
  }
  // Rounding can leave u marginally non-negative.
  return last_positive;
}

int sample_allocation(Index /*k*/, const ClusterState& state, const Vec& loglik_by_class,
                      RngStream& rng) {
  return draw_allocation(allocation_log_prior_vector(state.delta, state.G), loglik_by_class, rng);
}

double reflect_into(double x, double lo, double hi) {
  const bool has_lo = std::isfinite(lo), has_hi = std::isfinite(hi);
  if (has_lo && has_hi) {
    const double width = hi - lo;
    double y = std::fmod(x - lo, 2.0 * width);
    if (y < 0.0) y += 2.0 * width;
    if (y > width) y = 2.0 * width - y;
    return lo + y;
  }
  if (has_lo && x < lo) return 2.0 * lo - x;
  if (has_hi && x > hi) return 2.0 * hi - x;
  return x;
}

MhStep sample_lambda(int i, const ClusterState& state,
                     const std::function<double(double)>& class_loglik, double proposal_sd,
                     RngStream& rng) {
  if (i < 1 || i > state.G) throw InputError("sample_lambda: class index outside 1..G");
  const double current = state.lambda(i - 1);
  const double lo = lower_bound_of(state, i), hi = upper_bound_of(state, i);
  const double proposal = reflect_into(current + proposal_sd * rng.normal(), lo, hi);
  // Landing exactly on a neighbour would break strict ordering.
  if (!(proposal > lo && proposal < hi)) return {current, false};
  const double log_ratio = class_loglik(proposal) - class_loglik(current);
  if (std::log(rng.uniform()) < log_ratio) return {proposal, true};
  return {current, false};
}

MhStep sample_delta(const ClusterState& state, double proposal_sd, RngStream& rng) {
  const double current = state.delta;
  const double proposal = reflect_into(current + proposal_sd * rng.normal(), 0.0, state.delta_max);
  const double log_ratio = allocation_log_prior(state.Z, proposal, state.G) -
                           allocation_log_prior(state.Z, current, state.G);
  if (std::log(rng.uniform()) < log_ratio) return {proposal, true};
  return {current, false};
}

ClusterState initial_clusters(const Vec& log_risk, int G, double delta) {
  ClusterState s;
  s.G = G;
  s.delta = delta;
  Vec sorted = log_risk;
  std::sort(sorted.data(), sorted.data() + sorted.size());
  const double spread = std::max(1.0, sorted(sorted.size() - 1) - sorted(0));
  s.lambda.resize(G);
  for (int j = 0; j < G; ++j) {
    s.lambda(j) = quantile_sorted(sorted, (j + 0.5) / G);
    if (j > 0 && !(s.lambda(j) > s.lambda(j - 1))) s.lambda(j) = s.lambda(j - 1) + 1e-3 * spread;
  }
  s.Z.resize(log_risk.size());
  for (Index k = 0; k < log_risk.size(); ++k) {
    Index best = 0;
    (s.lambda.array() - log_risk(k)).abs().minCoeff(&best);
    s.Z(k) = static_cast<int>(best) + 1;
  }
  s.validate();
  return s;
}

}  // namespace sre

#include "sre/mcmc.hpp"
#include "sre/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace sre {

double effective_sample_size(const Vec& chain) {
  const Index n = chain.size();
  if (n < 4) return static_cast<double>(n);
  const Eigen::ArrayXd x = chain.array() - chain.mean();
  const double c0 = x.square().sum() / static_cast<double>(n);
  if (!(c0 > 0.0)) return static_cast<double>(n);
  auto rho = [&](Index lag) {
    return (x.head(n - lag) * x.tail(n - lag)).sum() / static_cast<double>(n) / c0;
  };
  // Geyer: sum consecutive pairs Γ_m = ρ_{2m} + ρ_{2m+1} while positive,
  // enforcing a monotone sequence.
  double sum = 0.0;
  double prev = std::numeric_limits<double>::infinity();
  for (Index m = 0; 2 * m + 1 < n; ++m) {
    double gamma = (m == 0 ? 1.0 : rho(2 * m)) + rho(2 * m + 1);
    if (gamma <= 0.0) break;
    gamma = std::min(gamma, prev);
    prev = gamma;
    sum += gamma;
  }
  const double tau = std::max(2.0 * sum - 1.0, 1.0 / std::log10(static_cast<double>(n)));
  return static_cast<double>(n) / tau;
}

std::optional<double> split_psrf(const std::vector<Vec>& chains) {
  if (chains.size() < 2) return std::nullopt;
  Index len = std::numeric_limits<Index>::max();
  for (const auto& c : chains) len = std::min(len, c.size());
  const Index half = len / 2;
  if (half < 2) return std::nullopt;
  std::vector<Eigen::ArrayXd> parts;
  for (const auto& c : chains) {
    parts.emplace_back(c.head(half).array());
    parts.emplace_back(c.segment(len - half, half).array());
  }
  double within = 0.0, grand = 0.0;
  for (const auto& p : parts) {
    within += (p - p.mean()).square().mean();
    grand += p.mean();
  }
  const double m = static_cast<double>(parts.size());
  within /= m;
  grand /= m;
  double between = 0.0;
  for (const auto& p : parts) between += (p.mean() - grand) * (p.mean() - grand);
  between /= m;
  if (!(within > 0.0)) return between > 0.0 ? std::optional(std::numeric_limits<double>::infinity())
                                            : std::optional(1.0);
  return std::sqrt((within + between) / within);
}

std::vector<std::pair<std::string, std::vector<Vec>>> scalar_series(
    const std::vector<ChainTrace>& traces) {
  std::vector<std::pair<std::string, std::vector<Vec>>> out;
  if (traces.empty()) return out;
  const ChainTrace& first = traces.front();
  auto collect = [&](const std::string& name, auto getter) {
    std::vector<Vec> chains;
    for (const auto& t : traces) chains.push_back(getter(t));
    out.emplace_back(name, std::move(chains));
  };
  for (Index j = 0; j < first.beta.cols(); ++j) {
    const std::string name = j < static_cast<Index>(first.beta_names.size())
                                 ? first.beta_names[j]
                                 : "beta[" + std::to_string(j) + "]";
    collect(name, [j](const ChainTrace& t) { return Vec(t.beta.col(j)); });
  }
  collect("alpha", [](const ChainTrace& t) { return t.alpha; });
  if (first.tau2.size() > 0) collect("tau2", [](const ChainTrace& t) { return t.tau2; });
  if (first.rho.size() > 0) collect("rho", [](const ChainTrace& t) { return t.rho; });
  if (first.delta.size() > 0) collect("delta", [](const ChainTrace& t) { return t.delta; });
  for (Index j = 0; j < first.lambda.cols(); ++j) {
    collect("lambda[" + std::to_string(j + 1) + "]",
            [j](const ChainTrace& t) { return Vec(t.lambda.col(j) - t.lambda_centre); });
  }
  return out;
}

Diagnostics diagnostics(const std::vector<ChainTrace>& traces) {
  Diagnostics d;
  const auto series = scalar_series(traces);
  d.ess.resize(static_cast<Index>(series.size()));
  d.psrf.resize(static_cast<Index>(series.size()));
  d.psrf_available = traces.size() >= 2;
  for (std::size_t i = 0; i < series.size(); ++i) {
    d.names.push_back(series[i].first);
    double ess = 0.0;
    for (const auto& c : series[i].second) ess += effective_sample_size(c);
    d.ess(static_cast<Index>(i)) = ess;
    const auto r = split_psrf(series[i].second);
    d.psrf(static_cast<Index>(i)) = r ? *r : std::numeric_limits<double>::quiet_NaN();
  }
  return d;
}

const ParamSummary& PosteriorSummary::at(const std::string& name) const {
  for (const auto& p : params) {
    if (p.name == name) return p;
  }
  throw InputError("PosteriorSummary: no parameter named '" + name + "'");
}

namespace {

struct Moments {
  double mean, sd, lo, hi;
};

Moments moments(std::vector<double> v) {
  const double n = static_cast<double>(v.size());
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= n;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  std::sort(v.begin(), v.end());
  const double sd = v.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  const Vec sorted = Eigen::Map<const Vec>(v.data(), static_cast<Index>(v.size()));
  return {mean, sd, quantile_sorted(sorted, 0.025), quantile_sorted(sorted, 0.975)};
}

}  // namespace

PosteriorSummary summarize(const std::vector<ChainTrace>& traces, const ModelSpec& spec) {
  if (traces.empty()) throw InputError("summarize: no chains");
  for (const auto& t : traces) {
    if (t.size() == 0) throw InputError("summarize: chain " + std::to_string(t.chain_id) + " is empty");
  }
  PosteriorSummary s;
  s.model = spec.name();
  s.n_chains = static_cast<int>(traces.size());
  for (const auto& t : traces) s.n_samples += t.size();

  const Diagnostics diag = diagnostics(traces);
  const auto series = scalar_series(traces);
  for (std::size_t i = 0; i < series.size(); ++i) {
    std::vector<double> pooled;
    for (const auto& c : series[i].second) pooled.insert(pooled.end(), c.begin(), c.end());
    const Moments m = moments(std::move(pooled));
    ParamSummary p{series[i].first, m.mean, m.sd, m.lo, m.hi, diag.ess(static_cast<Index>(i)), std::nullopt};
    if (diag.psrf_available) p.psrf = diag.psrf(static_cast<Index>(i));
    s.params.push_back(std::move(p));
  }

  std::vector<double> rr;
  for (const auto& t : traces) {
    for (Index j = 0; j < t.size(); ++j) rr.push_back(std::exp(t.alpha(j) * spec.increment));
  }
  const Moments m = moments(std::move(rr));
  s.relative_risk = {spec.increment, m.mean, m.lo, m.hi};

  const Index n_areas = traces.front().phi.cols();
  if (n_areas > 0) {
    s.phi_mean.resize(n_areas);
    s.phi_lo95.resize(n_areas);
    s.phi_hi95.resize(n_areas);
    std::vector<double> col;
    for (Index k = 0; k < n_areas; ++k) {
      col.clear();
      for (const auto& t : traces) {
        for (Index j = 0; j < t.phi.rows(); ++j) col.push_back(t.phi(j, k));
      }
      const Moments mk = moments(col);
      s.phi_mean(k) = mk.mean;
      s.phi_lo95(k) = mk.lo;
      s.phi_hi95(k) = mk.hi;
    }
  }
  return s;
}

}  // namespace sre

#pragma once

#include "sre/graph.hpp"
#include "sre/model.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace sre {

enum class ResidualModel {
  None,        // φ = 0 (Bayesian Poisson GLM)
  GlobalCar,   // φ = θ, Leroux CAR
  Local,       // φ = λ_Z + θ, localised smoothing
  Orthogonal,  // φ = M γ, leading eigenvectors of P W P
};

const char* to_string(ResidualModel r);

struct ModelSpec {
  ResidualModel residual = ResidualModel::Local;
  ExposureLink link = ExposureLink::Ecological;
  int G = 5;
  Index hh_q = 50;
  double increment = 1.0;  // pollutant increment Δ for exp(α Δ)

  // car | local | local-agg | hh | bayes-glm
  static ModelSpec from_name(const std::string& name);
  std::string name() const;

  void validate() const;
};

struct Priors {
  double beta_mean = 0.0;
  double beta_variance = 1e5;
  double alpha_mean = 0.0;
  double alpha_variance = 1e5;
  double tau2_a = 0.001;
  double tau2_b = 0.001;
  double delta_max = 100.0;
  double gamma_variance = 1e3;
};

// Starting proposal scales. Zero means "derive from the initial GLM fit".
struct ProposalScales {
  double beta = 1.0;  // multiplies the Cholesky factor of the GLM covariance
  double alpha = 0.0;
  double shift = 0.0;
  double theta = 1.0;  // per-area sd is theta / sqrt(1 + Y_k)
  double rho = 0.5;    // on the logit scale
  double lambda = 0.05;
  double delta = 2.0;
  double gamma = 0.02;
};

enum class Block { Beta, Alpha, Shift, Theta, Tau2, Rho, Lambda, Allocation, Delta, Gamma };

const char* to_string(Block b);
std::optional<Block> block_from_string(const std::string& name);

struct FitConfig {
  int n_iterations = 20000;
  int burn_in = 10000;
  int thin = 10;
  int n_chains = 1;
  std::uint64_t seed = 1;
  Priors priors;
  ProposalScales proposal;
  int adapt_interval = 100;
  bool use_likelihood = true;  // false samples the prior
  bool store_phi = true;
  std::vector<Block> frozen;   // held at their initial values
  unsigned threads = 0;        // 0: hardware concurrency capped by SRE_THREADS

  Index retained() const { return (n_iterations - burn_in) / thin; }
  bool is_frozen(Block b) const;
  void validate() const;
};

/// Retained draws of one chain. Components absent from the model have
/// zero-length storage.
struct ChainTrace {
  int chain_id = 0;
  ModelSpec spec;
  std::vector<std::string> beta_names;
  std::vector<int> iterations;
  Mat beta;            // samples × p
  Vec alpha;
  Vec tau2, rho;       // CAR and local models
  Vec delta;           // local model
  Mat lambda;          // samples × G, raw levels
  Vec lambda_centre;   // allocation-weighted mean of λ per sample
  Mat gamma;           // samples × q (orthogonal model)
  Mat phi;             // samples × n, when stored
  Vec log_likelihood;
  std::map<std::string, double> acceptance;  // post burn-in rate per block

  Index size() const { return alpha.size(); }
};

ChainTrace run_chain(const HealthDataset& data, const ExposureSet& exposures, const AreaGraph& graph,
                     const ModelSpec& spec, const FitConfig& config, int chain_id = 0);

/// config.n_chains chains with ids 0..n_chains−1, run concurrently. The
/// result depends only on the inputs, never on the thread count.
std::vector<ChainTrace> run_chains(const HealthDataset& data, const ExposureSet& exposures,
                                   const AreaGraph& graph, const ModelSpec& spec,
                                   const FitConfig& config);

struct ParamSummary {
  std::string name;
  double mean = 0.0;
  double sd = 0.0;
  double lo95 = 0.0;
  double hi95 = 0.0;
  double ess = 0.0;
  std::optional<double> psrf;
};

struct RiskSummary {
  double increment = 1.0;
  double mean = 1.0;
  double lo95 = 1.0;
  double hi95 = 1.0;
};

struct PosteriorSummary {
  std::string model;
  int n_chains = 0;
  Index n_samples = 0;  // pooled
  std::vector<ParamSummary> params;
  RiskSummary relative_risk;
  Vec phi_mean, phi_lo95, phi_hi95;  // empty unless φ was stored

  const ParamSummary& at(const std::string& name) const;
};

PosteriorSummary summarize(const std::vector<ChainTrace>& traces, const ModelSpec& spec);

struct Diagnostics {
  std::vector<std::string> names;
  Vec ess;
  Vec psrf;  // NaN where unavailable
  bool psrf_available = false;
};

/// ESS (summed over chains) and split-chain PSRF for every scalar parameter.
Diagnostics diagnostics(const std::vector<ChainTrace>& traces);

/// Geyer initial-positive-sequence effective sample size of one chain.
double effective_sample_size(const Vec& chain);

/// Split-chain potential scale reduction: sqrt(pooled variance / mean
/// within-half variance), both with divisor n. Equals 1 exactly when every
/// half-chain has the same mean. Empty when fewer than 2 chains.
std::optional<double> split_psrf(const std::vector<Vec>& chains);

// Named scalar series of a trace set: β by name, alpha, tau2, rho, delta,
// lambda[j] (centred on lambda_centre).
std::vector<std::pair<std::string, std::vector<Vec>>> scalar_series(
    const std::vector<ChainTrace>& traces);

}  // namespace sre

#include "sre/mcmc.hpp"

#include "sre/car.hpp"
#include "sre/comparators.hpp"
#include "sre/localcluster.hpp"
#include "sre/numerics.hpp"
#include "sre/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

namespace sre {

const char* to_string(ResidualModel r) {
  switch (r) {
    case ResidualModel::None: return "none";
    case ResidualModel::GlobalCar: return "global-car";
    case ResidualModel::Local: return "local";
    case ResidualModel::Orthogonal: return "orthogonal";
  }
  return "?";
}

ModelSpec ModelSpec::from_name(const std::string& name) {
  ModelSpec s;
  if (name == "car") {
    s.residual = ResidualModel::GlobalCar;
  } else if (name == "local") {
    s.residual = ResidualModel::Local;
  } else if (name == "local-agg") {
    s.residual = ResidualModel::Local;
    s.link = ExposureLink::Aggregate;
  } else if (name == "hh") {
    s.residual = ResidualModel::Orthogonal;
  } else if (name == "bayes-glm") {
    s.residual = ResidualModel::None;
  } else {
    throw InputError("unknown model '" + name + "'");
  }
  return s;
}

std::string ModelSpec::name() const {
  switch (residual) {
    case ResidualModel::None: return link == ExposureLink::Aggregate ? "bayes-glm-agg" : "bayes-glm";
    case ResidualModel::GlobalCar: return link == ExposureLink::Aggregate ? "car-agg" : "car";
    case ResidualModel::Local: return link == ExposureLink::Aggregate ? "local-agg" : "local";
    case ResidualModel::Orthogonal: return link == ExposureLink::Aggregate ? "hh-agg" : "hh";
  }
  return "?";
}

void ModelSpec::validate() const {
  if (residual == ResidualModel::Local && (G < 3 || G % 2 == 0)) {
    throw InputError("ModelSpec: the local model needs an odd G >= 3");
  }
  if (residual == ResidualModel::Orthogonal && hh_q < 0) throw InputError("ModelSpec: hh_q must be >= 0");
  if (!std::isfinite(increment)) throw InputError("ModelSpec: increment must be finite");
}

const char* to_string(Block b) {
  switch (b) {
    case Block::Beta: return "beta";
    case Block::Alpha: return "alpha";
    case Block::Shift: return "shift";
    case Block::Theta: return "theta";
    case Block::Tau2: return "tau2";
    case Block::Rho: return "rho";
    case Block::Lambda: return "lambda";
    case Block::Allocation: return "allocation";
    case Block::Delta: return "delta";
    case Block::Gamma: return "gamma";
  }
  return "?";
}

std::optional<Block> block_from_string(const std::string& name) {
  for (Block b : {Block::Beta, Block::Alpha, Block::Shift, Block::Theta, Block::Tau2, Block::Rho,
                  Block::Lambda, Block::Allocation, Block::Delta, Block::Gamma}) {
    if (name == to_string(b)) return b;
  }
  return std::nullopt;
}

bool FitConfig::is_frozen(Block b) const {
  return std::find(frozen.begin(), frozen.end(), b) != frozen.end();
}

void FitConfig::validate() const {
  if (n_iterations < 1) throw InputError("FitConfig: n_iterations must be positive");
  if (burn_in < 0 || burn_in >= n_iterations) throw InputError("FitConfig: need 0 <= burn_in < n_iterations");
  if (thin < 1) throw InputError("FitConfig: thin must be >= 1");
  if (n_chains < 1) throw InputError("FitConfig: n_chains must be >= 1");
  if (adapt_interval < 1) throw InputError("FitConfig: adapt_interval must be >= 1");
  if (!(priors.beta_variance > 0) || !(priors.alpha_variance > 0) || !(priors.gamma_variance > 0)) {
    throw InputError("FitConfig: prior variances must be positive");
  }
  if (!(priors.tau2_a > 0) || !(priors.tau2_b > 0)) throw InputError("FitConfig: tau2 prior needs a, b > 0");
  if (!(priors.delta_max > 0)) throw InputError("FitConfig: delta_max must be positive");
}

namespace {

// Random-walk scale tuned towards an acceptance window during burn-in.
struct Tuner {
  double scale = 1.0;
  double lo = 0.4, hi = 0.5;
  double max_scale = std::numeric_limits<double>::infinity();
  long window_accepted = 0, window_proposed = 0;
  long accepted = 0, proposed = 0;  // post burn-in
  long adaptations = 0;

  void record(bool ok, bool burning) {
    if (burning) {
      window_accepted += ok;
      ++window_proposed;
    } else {
      accepted += ok;
      ++proposed;
    }
  }

  void adapt() {
    if (window_proposed == 0) return;
    const double rate = static_cast<double>(window_accepted) / static_cast<double>(window_proposed);
    // Small corrections shrink as burn-in goes on, so the frozen scale does
    // not hinge on the noise of the last window.
    ++adaptations;
    const double step = 0.2 * std::sqrt(10.0 / std::max(10.0, static_cast<double>(adaptations)));
    if (rate > hi) scale *= rate > 0.9 ? 2.0 : 1.0 + step;
    if (rate < lo) scale *= rate < 0.05 ? 0.5 : 1.0 / (1.0 + step);
    // On a flat target the rate never drops; beyond the support width a
    // larger step only erodes the precision of the reflection.
    scale = std::min(scale, max_scale);
    window_accepted = window_proposed = 0;
  }

  std::optional<double> rate() const {
    if (proposed == 0) return std::nullopt;
    return static_cast<double>(accepted) / static_cast<double>(proposed);
  }
};

double logit(double p) { return std::log(p / (1.0 - p)); }
double expit(double x) { return 1.0 / (1.0 + std::exp(-x)); }

class Sampler {
 public:
  Sampler(const HealthDataset& data, const ExposureSet& exposures, const AreaGraph& graph,
          const ModelSpec& spec, const FitConfig& config, int chain_id)
      : data_(data),
        graph_(graph),
        spec_(spec),
        config_(config),
        chain_id_(chain_id),
        terms_(exposures),
        rng_(config.seed, mix_keys({0x636861696eULL, static_cast<std::uint64_t>(chain_id)})),
        n_(data.size()),
        p_(data.num_covariates()) {
    data.validate();
    spec.validate();
    config.validate();
    if (exposures.size() != n_) throw InputError("run_chain: exposure set does not cover every area");
    if (uses_car() && graph.size() != n_) throw InputError("run_chain: graph size differs from dataset");
    log_e_ = data.E.array().log();
    lgamma_y_ = data.Y.unaryExpr([](double y) { return std::lgamma(y + 1.0); });
    burning_ = config.burn_in > 0;
    initialise();
  }

  ChainTrace run();

 private:
  bool uses_car() const {
    return spec_.residual == ResidualModel::GlobalCar || spec_.residual == ResidualModel::Local;
  }
  bool uses_local() const { return spec_.residual == ResidualModel::Local; }
  bool uses_basis() const { return spec_.residual == ResidualModel::Orthogonal && basis_.cols() > 0; }
  bool active(Block b) const { return !config_.is_frozen(b); }

  double area_loglik(Index k, double eta) const {
    if (!config_.use_likelihood) return 0.0;
    return data_.Y(k) * eta - std::exp(eta) - lgamma_y_(k);
  }
  double total_loglik(const Vec& eta) const {
    if (!config_.use_likelihood) return 0.0;
    return (data_.Y.array() * eta.array() - eta.array().exp() - lgamma_y_.array()).sum();
  }
  double beta_log_prior(const Vec& beta) const {
    return -0.5 * (beta.array() - config_.priors.beta_mean).square().sum() / config_.priors.beta_variance;
  }
  double alpha_log_prior(double alpha) const {
    const double d = alpha - config_.priors.alpha_mean;
    return -0.5 * d * d / config_.priors.alpha_variance;
  }
  double theta_log_prior(const Vec& theta) const {
    return -0.5 * leroux_quadratic_form(graph_, theta, rho_) / tau2_;
  }

  void initialise();
  void rebuild_eta();
  void check_start() const;
  void refresh_shift_direction();

  void update_beta();
  void update_alpha();
  void update_shift();
  void update_theta();
  void update_tau2();
  void update_rho();
  void update_lambda();
  void update_allocation();
  void update_relabel();
  void update_delta();
  void update_gamma();

  void adapt_all();
  void record(ChainTrace& trace, int iteration);

  const HealthDataset& data_;
  const AreaGraph& graph_;
  const ModelSpec& spec_;
  const FitConfig& config_;
  int chain_id_;
  ExposureTerms terms_;
  RngStream rng_;
  Index n_, p_;
  bool burning_ = true;

  Vec log_e_, lgamma_y_;

  // State.
  Vec beta_;
  double alpha_ = 0.0;
  Vec theta_;
  double tau2_ = 0.1, rho_ = 0.5;
  ClusterState clusters_;
  Vec gamma_;

  // Cached pieces of the log mean: eta = log E + Xβ + φ + exposure term.
  Vec xb_, phi_, expo_, eta_;
  Vec scratch_expo_, scratch_eta_;

  Mat beta_chol_;
  Mat basis_;
  Vec theta_step_;         // per-area proposal multiplier
  Vec shift_direction_;    // exposure slope, centred
  double shift_mean_ = 0.0;
  std::unique_ptr<LerouxLogDet> log_det_;

  Tuner t_beta_, t_alpha_, t_shift_, t_theta_, t_rho_, t_delta_, t_gamma_;
  std::vector<Tuner> t_lambda_;
};

void Sampler::initialise() {
  // Fixed effects from the quasi-Poisson fit on the weighted means.
  Vec glm_cov_diag;
  Mat glm_cov;
  try {
    const GlmFit glm = fit_glm(data_, terms_.means());
    beta_ = glm.coefficients.head(p_);
    alpha_ = glm.coefficients(p_);
    glm_cov = glm.covariance;
  } catch (const Error&) {
    beta_ = Vec::Zero(p_);
    beta_(0) = std::log(data_.Y.sum() / data_.E.sum() + 1e-8);
    alpha_ = 0.0;
    glm_cov = Mat::Identity(p_ + 1, p_ + 1) * 1e-4;
  }
  const Mat cov_beta = glm_cov.topLeftCorner(p_, p_);
  Eigen::LLT<Mat> llt(cov_beta);
  beta_chol_ = llt.info() == Eigen::Success ? Mat(llt.matrixL()) : Mat(Mat::Identity(p_, p_) * 1e-2);
  const double alpha_se = std::sqrt(std::max(glm_cov(p_, p_), 1e-12));

  const auto& prop = config_.proposal;
  t_beta_.scale = prop.beta * 2.38 / std::sqrt(static_cast<double>(p_));
  if (p_ > 1) t_beta_.lo = 0.25, t_beta_.hi = 0.45;
  t_alpha_.scale = prop.alpha > 0 ? prop.alpha : alpha_se;
  t_shift_.scale = prop.shift > 0 ? prop.shift : alpha_se;
  t_theta_.scale = prop.theta;
  t_rho_.scale = prop.rho;
  t_delta_.scale = prop.delta;
  t_gamma_.scale = prop.gamma;

  theta_step_ = (1.0 + data_.Y.array()).rsqrt();

  // Residual log risk after the fixed effects seeds τ² and the cluster levels.
  const Vec fitted = data_.X * beta_ + alpha_ * terms_.means();
  const Vec resid = ((data_.Y.array() + 0.5) / data_.E.array()).log().matrix() - fitted;
  const double resid_var = (resid.array() - resid.mean()).square().mean();

  theta_ = Vec::Zero(n_);
  if (uses_car()) {
    tau2_ = std::clamp(resid_var, 1e-3, 1.0);
    rho_ = 0.5;
    log_det_ = std::make_unique<LerouxLogDet>(graph_);
  }
  if (uses_local()) {
    // λ seeded at quantiles of log(SMR + 0.01) net of the fixed effects.
    const Vec log_smr_resid = (data_.smr().array() + 0.01).log().matrix() - fitted;
    clusters_ = initial_clusters(log_smr_resid, spec_.G, 1.0);
    clusters_.delta_max = config_.priors.delta_max;
    clusters_.delta = std::min(clusters_.delta, clusters_.delta_max);
    t_delta_.max_scale = clusters_.delta_max;
    t_lambda_.assign(static_cast<std::size_t>(spec_.G), Tuner{});
    for (auto& t : t_lambda_) t.scale = prop.lambda;
  }
  if (spec_.residual == ResidualModel::Orthogonal && spec_.hh_q > 0) {
    Mat design(n_, p_ + 1);
    design << data_.X, terms_.means();
    basis_ = hh_basis(design, graph_, spec_.hh_q).vectors;
    gamma_ = Vec::Zero(basis_.cols());
  }

  refresh_shift_direction();
  rebuild_eta();
  check_start();
}

void Sampler::refresh_shift_direction() {
  terms_.slopes(alpha_, spec_.link, shift_direction_);
  shift_mean_ = shift_direction_.mean();
  shift_direction_.array() -= shift_mean_;
}

void Sampler::rebuild_eta() {
  xb_ = data_.X * beta_;
  phi_ = Vec::Zero(n_);
  if (uses_car()) phi_ = theta_;
  if (uses_local()) {
    for (Index k = 0; k < n_; ++k) phi_(k) += clusters_.lambda(clusters_.Z(k) - 1);
  }
  if (uses_basis()) phi_ = basis_ * gamma_;
  terms_.log_terms(alpha_, spec_.link, expo_);
  eta_ = log_e_ + xb_ + phi_ + expo_;
}

void Sampler::check_start() const {
  auto fail = [](const std::string& what) {
    throw FitError("run_chain: non-finite log-posterior at initialisation (" + what + ")");
  };
  if (!expo_.allFinite()) fail("exposure link");
  if (!std::isfinite(total_loglik(eta_))) fail("likelihood");
  if (!std::isfinite(beta_log_prior(beta_))) fail("beta prior");
  if (!std::isfinite(alpha_log_prior(alpha_))) fail("alpha prior");
  if (uses_car() && !std::isfinite(theta_log_prior(theta_) + (*log_det_)(rho_))) fail("CAR prior");
  if (uses_local() && !std::isfinite(allocation_log_prior(clusters_.Z, clusters_.delta, clusters_.G))) {
    fail("allocation prior");
  }
}

void Sampler::update_beta() {
  const Vec proposal = beta_ + t_beta_.scale * (beta_chol_ * rng_.normal_vector(p_));
  const Vec xb = data_.X * proposal;
  scratch_eta_ = eta_ + (xb - xb_);
  const double log_ratio = total_loglik(scratch_eta_) - total_loglik(eta_) +
                           beta_log_prior(proposal) - beta_log_prior(beta_);
  const bool ok = std::log(rng_.uniform()) < log_ratio;
  if (ok) {
    beta_ = proposal;
    xb_ = xb;
    eta_.swap(scratch_eta_);
  }
  t_beta_.record(ok, burning_);
}

void Sampler::update_alpha() {
  const double proposal = alpha_ + t_alpha_.scale * rng_.normal();
  terms_.log_terms(proposal, spec_.link, scratch_expo_);
  scratch_eta_ = eta_ + (scratch_expo_ - expo_);
  const double log_ratio = total_loglik(scratch_eta_) - total_loglik(eta_) +
                           alpha_log_prior(proposal) - alpha_log_prior(alpha_);
  const bool ok = std::log(rng_.uniform()) < log_ratio;
  if (ok) {
    alpha_ = proposal;
    expo_.swap(scratch_expo_);
    eta_.swap(scratch_eta_);
  }
  t_alpha_.record(ok, burning_);
}

// Joint move along the α ridge: α += ε while the intercept absorbs ε times
// the mean exposure slope and θ (when present) absorbs the centred remainder,
// leaving the linear predictor unchanged to first order. The displacement is
// a fixed vector times ε, so the proposal is symmetric.
void Sampler::update_shift() {
  const double eps = t_shift_.scale * rng_.normal();
  const double proposal = alpha_ + eps;
  terms_.log_terms(proposal, spec_.link, scratch_expo_);
  Vec beta_new = beta_;
  beta_new(0) -= eps * shift_mean_;
  double log_ratio = alpha_log_prior(proposal) - alpha_log_prior(alpha_) + beta_log_prior(beta_new) -
                     beta_log_prior(beta_);
  scratch_eta_ = eta_ + (scratch_expo_ - expo_);
  scratch_eta_.array() -= eps * shift_mean_;
  Vec theta_new;
  const bool move_theta = uses_car() && active(Block::Theta);
  if (move_theta) {
    theta_new = theta_ - eps * shift_direction_;
    scratch_eta_ -= eps * shift_direction_;
    log_ratio += theta_log_prior(theta_new) - theta_log_prior(theta_);
  }
  log_ratio += total_loglik(scratch_eta_) - total_loglik(eta_);
  const bool ok = std::log(rng_.uniform()) < log_ratio;
  if (ok) {
    alpha_ = proposal;
    beta_ = beta_new;
    xb_.array() -= eps * shift_mean_;
    expo_.swap(scratch_expo_);
    eta_.swap(scratch_eta_);
    if (move_theta) {
      phi_ -= eps * shift_direction_;
      theta_.swap(theta_new);
    }
  }
  t_shift_.record(ok, burning_);
}

void Sampler::update_theta() {
  const double denom_base = 1.0 - rho_;
  for (Index k = 0; k < n_; ++k) {
    const double denom = rho_ * static_cast<double>(graph_.degree(k)) + denom_base;
    const double mean = rho_ * graph_.neighbour_sum(k, theta_) / denom;
    const double var = tau2_ / denom;
    const double current = theta_(k);
    const double proposal = current + t_theta_.scale * theta_step_(k) * rng_.normal();
    const double diff = proposal - current;
    const double log_ratio = area_loglik(k, eta_(k) + diff) - area_loglik(k, eta_(k)) -
                             ((proposal - mean) * (proposal - mean) - (current - mean) * (current - mean)) /
                                 (2.0 * var);
    const bool ok = std::log(rng_.uniform()) < log_ratio;
    if (ok) {
      theta_(k) = proposal;
      phi_(k) += diff;
      eta_(k) += diff;
    }
    t_theta_.record(ok, burning_);
  }
}

void Sampler::update_tau2() {
  tau2_ = sample_tau2(theta_, rho_, graph_, config_.priors.tau2_a, config_.priors.tau2_b, rng_);
}

void Sampler::update_rho() {
  double edge_sum = 0.0;
  for (auto [a, b] : graph_.edges()) {
    const double d = theta_(a) - theta_(b);
    edge_sum += d * d;
  }
  const double sq = theta_.squaredNorm();
  auto target = [&](double rho) {
    return 0.5 * (*log_det_)(rho) - (rho * edge_sum + (1.0 - rho) * sq) / (2.0 * tau2_) +
           std::log(rho) + std::log1p(-rho);
  };
  const double proposal = expit(logit(rho_) + t_rho_.scale * rng_.normal());
  bool ok = false;
  if (proposal > 0.0 && proposal < 1.0) {
    ok = std::log(rng_.uniform()) < target(proposal) - target(rho_);
  }
  if (ok) rho_ = proposal;
  t_rho_.record(ok, burning_);
}

void Sampler::update_lambda() {
  const int G = clusters_.G;
  std::vector<std::vector<Index>> members(static_cast<std::size_t>(G));
  for (Index k = 0; k < n_; ++k) members[clusters_.Z(k) - 1].push_back(k);
  for (int i = 1; i <= G; ++i) {
    const auto& areas = members[i - 1];
    const double current = clusters_.lambda(i - 1);
    auto class_loglik = [&](double value) {
      double s = 0.0;
      for (Index k : areas) s += area_loglik(k, eta_(k) + value - current);
      return s;
    };
    const MhStep step = sample_lambda(i, clusters_, class_loglik, t_lambda_[i - 1].scale, rng_);
    if (step.accepted) {
      const double diff = step.value - current;
      clusters_.lambda(i - 1) = step.value;
      for (Index k : areas) {
        phi_(k) += diff;
        eta_(k) += diff;
      }
    }
    // Empty classes follow the flat prior; only likelihood-informed
    // proposals count towards tuning and the acceptance log.
    if (!areas.empty()) t_lambda_[i - 1].record(step.accepted, burning_);
  }
}

void Sampler::update_allocation() {
  const int G = clusters_.G;
  Vec loglik(G);
  const Vec log_prior = allocation_log_prior_vector(clusters_.delta, G);
  for (Index k = 0; k < n_; ++k) {
    const double base = eta_(k) - clusters_.lambda(clusters_.Z(k) - 1);
    for (int z = 0; z < G; ++z) loglik(z) = area_loglik(k, base + clusters_.lambda(z));
    const int z_new = draw_allocation(log_prior, loglik, rng_);
    if (z_new != clusters_.Z(k)) {
      const double diff = clusters_.lambda(z_new - 1) - clusters_.lambda(clusters_.Z(k) - 1);
      clusters_.Z(k) = z_new;
      phi_(k) += diff;
      eta_(k) += diff;
    }
  }
}

// Relabelling move: Z_k jumps to another class while θ_k absorbs the change
// in λ, so φ_k and the likelihood are untouched and only the CAR conditional
// and the allocation prior enter the ratio. Without it a step absorbed by θ
// can never be handed back to λ.
void Sampler::update_relabel() {
  const int G = clusters_.G;
  if (G < 2) return;
  const Vec log_prior = allocation_log_prior_vector(clusters_.delta, G);
  const double denom_base = 1.0 - rho_;
  for (Index k = 0; k < n_; ++k) {
    const int z = clusters_.Z(k);
    int z_new = 1 + static_cast<int>(rng_.uniform() * (G - 1));
    if (z_new >= z) ++z_new;
    if (z_new > G) continue;
    const double denom = rho_ * static_cast<double>(graph_.degree(k)) + denom_base;
    const double mean = rho_ * graph_.neighbour_sum(k, theta_) / denom;
    const double current = theta_(k);
    const double proposal = current + clusters_.lambda(z - 1) - clusters_.lambda(z_new - 1);
    const double log_ratio =
        log_prior(z_new - 1) - log_prior(z - 1) -
        ((proposal - mean) * (proposal - mean) - (current - mean) * (current - mean)) * denom / (2.0 * tau2_);
    if (std::log(rng_.uniform()) < log_ratio) {
      clusters_.Z(k) = z_new;
      theta_(k) = proposal;
    }
  }
}

void Sampler::update_delta() {
  const MhStep step = sample_delta(clusters_, t_delta_.scale, rng_);
  if (step.accepted) clusters_.delta = step.value;
  t_delta_.record(step.accepted, burning_);
}

void Sampler::update_gamma() {
  const double var = config_.priors.gamma_variance;
  for (Index j = 0; j < gamma_.size(); ++j) {
    const double current = gamma_(j);
    const double proposal = current + t_gamma_.scale * rng_.normal();
    const double diff = proposal - current;
    scratch_eta_ = eta_ + diff * basis_.col(j);
    const double log_ratio = total_loglik(scratch_eta_) - total_loglik(eta_) -
                             (proposal * proposal - current * current) / (2.0 * var);
    const bool ok = std::log(rng_.uniform()) < log_ratio;
    if (ok) {
      gamma_(j) = proposal;
      phi_ += diff * basis_.col(j);
      eta_.swap(scratch_eta_);
    }
    t_gamma_.record(ok, burning_);
  }
}

void Sampler::adapt_all() {
  for (Tuner* t : {&t_beta_, &t_alpha_, &t_shift_, &t_theta_, &t_rho_, &t_delta_, &t_gamma_}) t->adapt();
  for (auto& t : t_lambda_) t.adapt();
  if (spec_.link == ExposureLink::Aggregate) refresh_shift_direction();
}

void Sampler::record(ChainTrace& t, int iteration) {
  const Index s = static_cast<Index>(t.iterations.size());
  t.iterations.push_back(iteration);
  t.beta.row(s) = beta_.transpose();
  t.alpha(s) = alpha_;
  if (uses_car()) {
    t.tau2(s) = tau2_;
    t.rho(s) = rho_;
  }
  if (uses_local()) {
    t.delta(s) = clusters_.delta;
    t.lambda.row(s) = clusters_.lambda.transpose();
    double centre = 0.0;
    for (Index k = 0; k < n_; ++k) centre += clusters_.lambda(clusters_.Z(k) - 1);
    t.lambda_centre(s) = centre / static_cast<double>(n_);
  }
  if (uses_basis()) t.gamma.row(s) = gamma_.transpose();
  if (config_.store_phi) t.phi.row(s) = phi_.transpose();
  t.log_likelihood(s) = config_.use_likelihood ? total_loglik(eta_) : 0.0;
}

ChainTrace Sampler::run() {
  ChainTrace t;
  t.chain_id = chain_id_;
  t.spec = spec_;
  t.beta_names = data_.covariate_names;
  const Index m = config_.retained();
  t.iterations.reserve(static_cast<std::size_t>(m));
  t.beta.resize(m, p_);
  t.alpha.resize(m);
  if (uses_car()) {
    t.tau2.resize(m);
    t.rho.resize(m);
  }
  if (uses_local()) {
    t.delta.resize(m);
    t.lambda.resize(m, spec_.G);
    t.lambda_centre.resize(m);
  }
  if (uses_basis()) t.gamma.resize(m, gamma_.size());
  if (config_.store_phi) t.phi.resize(m, n_);
  t.log_likelihood.resize(m);

  for (int it = 1; it <= config_.n_iterations; ++it) {
    burning_ = it <= config_.burn_in;
    if (active(Block::Beta)) update_beta();
    if (active(Block::Alpha)) update_alpha();
    if (active(Block::Shift)) update_shift();
    if (uses_car()) {
      if (active(Block::Theta)) update_theta();
      if (active(Block::Tau2)) update_tau2();
      if (active(Block::Rho)) update_rho();
    }
    if (uses_local()) {
      if (active(Block::Lambda)) update_lambda();
      if (active(Block::Allocation)) update_allocation();
      if (active(Block::Allocation) && uses_car() && active(Block::Theta)) update_relabel();
      if (active(Block::Delta)) update_delta();
    }
    if (uses_basis() && active(Block::Gamma)) update_gamma();

    if (burning_ && it % config_.adapt_interval == 0) adapt_all();
    if (!burning_ && (it - config_.burn_in) % config_.thin == 0 &&
        static_cast<Index>(t.iterations.size()) < m) {
      record(t, it);
    }
  }

  auto log_rate = [&](Block b, const Tuner& tuner) {
    if (auto r = tuner.rate()) t.acceptance[to_string(b)] = *r;
  };
  log_rate(Block::Beta, t_beta_);
  log_rate(Block::Alpha, t_alpha_);
  log_rate(Block::Shift, t_shift_);
  log_rate(Block::Theta, t_theta_);
  log_rate(Block::Rho, t_rho_);
  log_rate(Block::Delta, t_delta_);
  log_rate(Block::Gamma, t_gamma_);
  long acc = 0, prop = 0;
  for (const auto& tl : t_lambda_) {
    acc += tl.accepted;
    prop += tl.proposed;
  }
  if (prop > 0) t.acceptance["lambda"] = static_cast<double>(acc) / static_cast<double>(prop);
  return t;
}

}  // namespace

ChainTrace run_chain(const HealthDataset& data, const ExposureSet& exposures, const AreaGraph& graph,
                     const ModelSpec& spec, const FitConfig& config, int chain_id) {
  Sampler sampler(data, exposures, graph, spec, config, chain_id);
  return sampler.run();
}

std::vector<ChainTrace> run_chains(const HealthDataset& data, const ExposureSet& exposures,
                                   const AreaGraph& graph, const ModelSpec& spec,
                                   const FitConfig& config) {
  config.validate();
  std::vector<ChainTrace> traces(static_cast<std::size_t>(config.n_chains));
  parallel_for(config.n_chains, worker_count(config.threads), [&](Index c) {
    traces[c] = run_chain(data, exposures, graph, spec, config, static_cast<int>(c));
  });
  return traces;
}

}  // namespace sre

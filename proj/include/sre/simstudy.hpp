#pragma once

#include "sre/graph.hpp"
#include "sre/mcmc.hpp"
#include "sre/model.hpp"
#include "sre/numerics.hpp"

#include <string>
#include <utility>
#include <vector>

namespace sre {

enum class Confounding { A, B, C, D };
enum class ExposureMode { Point, WithinArea };
enum class Coupling { Independent, Linear };

const char* to_string(Confounding c);
const char* to_string(ExposureMode m);
const char* to_string(Coupling c);
Confounding confounding_from_string(const std::string& s);
ExposureMode exposure_mode_from_string(const std::string& s);
Coupling coupling_from_string(const std::string& s);

/// One simulation scenario. The true α is ln(relative_risk) / 2, so the
/// relative risk refers to a two-unit increase in concentration.
struct SimScenario {
  std::string label;
  Confounding confounding = Confounding::A;
  double sd_phi = 0.1;
  double relative_risk = 1.05;
  ExposureMode mode = ExposureMode::Point;
  double within_sd = 1.0;
  Coupling coupling = Coupling::Independent;
  double coupling_share = 0.245;  // share of within-area variance tied to the mean
  int replicates = 100;
  std::uint64_t seed = 1;

  Index n_areas = 323;
  double domain = 600.0;
  int neighbours = 8;
  double pollution_mean = 20.0;
  double pollution_variance = 16.0;
  double pollution_range = 75.0;
  double rough_range = 37.5;      // scenario B
  int clusters = 5;               // scenario D
  double cluster_offset = 0.3;    // scenario D offsets span [−offset, offset]
  Index cells_min = 10;
  Index cells_max = 400;
  double expected_lo = 70.0;
  double expected_hi = 130.0;

  double alpha() const { return 0.5 * std::log(relative_risk); }
  void validate() const;
};

/// Deterministic quasi-random layout: Halton (2, 3) points on a square.
Mat halton_centroids(Index n, double side);

/// k-nearest-neighbour graph, symmetrised (i ~ j if either is among the
/// other's k nearest). Distance ties break on the lower index.
AreaGraph knn_graph(const Mat& coords, int k);

/// k-means partition of the centroids, then repaired so that every cluster
/// induces a connected subgraph. Labels are 0..k−1.
IVec contiguous_clusters(const Mat& coords, const AreaGraph& graph, int k, RngStream& rng);

/// Fixed geometry shared by every replicate of a scenario, including the
/// Cholesky factors of the Gaussian-process covariances.
struct SimLayout {
  Mat coords;
  AreaGraph graph;
  Mat pollution_chol;
  Mat rough_chol;   // unit variance, rough_range
  Mat smooth_chol;  // unit variance, pollution_range

  static SimLayout build(const SimScenario& scenario);
};

/// One Gaussian-process draw with mean `mean` and Matérn 5/2 covariance.
Vec generate_pollution_surface(const Mat& coords, RngStream& rng, double mean = 20.0,
                               double variance = 4.0, double range = 75.0);
Vec generate_pollution_surface(const SimLayout& layout, double mean, RngStream& rng);

/// Residual spatial structure φ for scenarios A–D. A–C are centred and
/// rescaled to empirical SD sd_phi exactly; D adds contiguous cluster offsets
/// to a rescaled smooth surface.
Vec generate_confounding(Confounding scenario, double sd_phi, const SimLayout& layout,
                         const SimScenario& settings, RngStream& rng);

/// Per-area within-area variances. Independent: sd² everywhere. Linear:
/// a + b μ_k with b = share · sd² / mean(μ) and a = (1 − share) · sd², so the
/// across-area average is sd².
Vec within_area_variances(const Vec& mu, Coupling coupling, double sd, double share = 0.245);

/// q i.i.d. N(mu, variance) concentrations.
Vec generate_within_area(double mu, double variance, Index q, RngStream& rng);

struct DiseaseDraw {
  Vec E;
  Vec Y;
};

/// E_k ~ U(lo, hi), Y_k ~ Poisson(E_k R_k).
DiseaseDraw generate_disease(const Vec& R, RngStream& rng, double lo = 70.0, double hi = 130.0);

struct SimReplicate {
  HealthDataset data;
  ExposureSet exposures;
  Vec phi;
  Vec pollution;  // area means μ_k
  double alpha = 0.0;
};

SimReplicate simulate_replicate(const SimScenario& scenario, const SimLayout& layout,
                                const std::vector<Index>& cells, int replicate);

/// Cells per area, shared by all replicates of a scenario.
std::vector<Index> draw_cell_counts(const SimScenario& scenario);

struct MetricRow {
  std::string scenario;
  std::string model;
  double bias_pct = 0.0;
  double rmse_pct = 0.0;
  double coverage_pct = 0.0;
  int n_ok = 0;
  int n_failed = 0;
};

using MetricTable = std::vector<MetricRow>;

/// Percentage bias, RMSE and interval coverage of replicate estimates.
MetricRow evaluate(const Vec& estimates, const std::vector<std::pair<double, double>>& intervals,
                   double truth);

struct AlphaEstimate {
  double estimate = 0.0;
  double lo95 = 0.0;
  double hi95 = 0.0;
};

/// Fits one model by name (glm, bayes-glm, car, local, local-agg, hh) and
/// returns the point estimate and 95% interval for α.
AlphaEstimate fit_alpha(const std::string& model, const SimReplicate& replicate, const AreaGraph& graph,
                        const FitConfig& config);

/// Raised when too many replicates fail to fit.
class StudyError : public Error {
 public:
  using Error::Error;
};

struct StudyResult {
  MetricTable rows;
  // estimates[m][r] for model m and replicate r; NaN where the fit failed.
  std::vector<Vec> estimates;
};

/// Runs every replicate of the scenario through every model. Replicates run
/// in parallel and each owns its random streams, so the output depends only
/// on the inputs. Failed fits are excluded and counted; 5% or more failures
/// for any model throws StudyError.
StudyResult run_study(const SimScenario& scenario, const std::vector<std::string>& models,
                      const FitConfig& config, unsigned threads = 0);

struct StudyPreset {
  std::vector<SimScenario> scenarios;
  std::vector<std::string> models;
  FitConfig config;
};

/// study1, study2, study1-quick or study2-quick.
StudyPreset study_preset(const std::string& name);

}  // namespace sre

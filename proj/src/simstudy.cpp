#include "sre/simstudy.hpp"

#include "sre/comparators.hpp"
#include "sre/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>

namespace sre {

const char* to_string(Confounding c) {
  switch (c) {
    case Confounding::A: return "A";
    case Confounding::B: return "B";
    case Confounding::C: return "C";
    case Confounding::D: return "D";
  }
  return "?";
}

const char* to_string(ExposureMode m) { return m == ExposureMode::Point ? "point" : "within-area"; }
const char* to_string(Coupling c) { return c == Coupling::Independent ? "independent" : "linear"; }

Confounding confounding_from_string(const std::string& s) {
  if (s == "A") return Confounding::A;
  if (s == "B") return Confounding::B;
  if (s == "C") return Confounding::C;
  if (s == "D") return Confounding::D;
  throw InputError("unknown confounding structure '" + s + "' (expected A, B, C or D)");
}

ExposureMode exposure_mode_from_string(const std::string& s) {
  if (s == "point") return ExposureMode::Point;
  if (s == "within-area") return ExposureMode::WithinArea;
  throw InputError("unknown exposure mode '" + s + "' (expected point or within-area)");
}

Coupling coupling_from_string(const std::string& s) {
  if (s == "independent") return Coupling::Independent;
  if (s == "linear") return Coupling::Linear;
  throw InputError("unknown coupling '" + s + "' (expected independent or linear)");
}

void SimScenario::validate() const {
  if (!(sd_phi > 0.0)) throw InputError("scenario " + label + ": sd_phi must be positive");
  if (!(relative_risk > 0.0) || relative_risk == 1.0) {
    throw InputError("scenario " + label + ": relative_risk must be positive and differ from 1");
  }
  if (!(within_sd >= 0.0)) throw InputError("scenario " + label + ": within_sd must be non-negative");
  if (!(coupling_share > 0.0 && coupling_share <= 1.0)) {
    throw InputError("scenario " + label + ": coupling_share must lie in (0, 1]");
  }
  if (replicates < 1) throw InputError("scenario " + label + ": replicates must be >= 1");
  if (n_areas < 3) throw InputError("scenario " + label + ": need at least 3 areas");
  if (neighbours < 1 || neighbours >= n_areas) throw InputError("scenario " + label + ": bad neighbour count");
  if (!(domain > 0.0) || !(pollution_variance > 0.0) || !(pollution_range > 0.0) || !(rough_range > 0.0)) {
    throw InputError("scenario " + label + ": geometry and covariance settings must be positive");
  }
  if (clusters < 2 || clusters > n_areas) throw InputError("scenario " + label + ": bad cluster count");
  if (!(cluster_offset >= 0.0)) throw InputError("scenario " + label + ": cluster_offset must be >= 0");
  if (cells_min < 1 || cells_max < cells_min) throw InputError("scenario " + label + ": bad cell range");
  if (!(expected_lo > 0.0) || !(expected_hi >= expected_lo)) {
    throw InputError("scenario " + label + ": bad expected-count range");
  }
}

namespace {

double radical_inverse(Index i, int base) {
  double f = 1.0, r = 0.0;
  while (i > 0) {
    f /= base;
    r += f * static_cast<double>(i % base);
    i /= base;
  }
  return r;
}

// Cholesky with a small diagonal jitter if the covariance is numerically
// semi-definite.
Mat gp_factor(const Mat& coords, double variance, double range) {
  Mat c = matern_covariance(coords, variance, range);
  for (double jitter : {0.0, 1e-10, 1e-8}) {
    try {
      Mat cj = c;
      cj.diagonal().array() += jitter * variance;
      return cholesky(cj);
    } catch (const NumericalError&) {
    }
  }
  throw NumericalError("Gaussian-process covariance is not positive definite");
}

void centre_and_scale(Vec& x, double sd) {
  x.array() -= x.mean();
  const double s = std::sqrt(x.squaredNorm() / static_cast<double>(x.size() - 1));
  if (!(s > 0.0)) throw NumericalError("cannot rescale a constant field");
  x *= sd / s;
}

struct Streams {
  enum : std::uint64_t { Pollution = 1, Confounding, Within, Disease, Fit, Cells };
};

}  // namespace

Mat halton_centroids(Index n, double side) {
  Mat c(n, 2);
  for (Index i = 0; i < n; ++i) {
    c(i, 0) = side * radical_inverse(i + 1, 2);
    c(i, 1) = side * radical_inverse(i + 1, 3);
  }
  return c;
}

AreaGraph knn_graph(const Mat& coords, int k) {
  const Index n = coords.rows();
  if (k < 1 || k >= n) throw InputError("knn_graph: k must lie in [1, n - 1]");
  std::vector<std::pair<Index, Index>> pairs;
  std::vector<std::pair<double, Index>> dist(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) dist[j] = {(coords.row(i) - coords.row(j)).squaredNorm(), j};
    dist[i].first = std::numeric_limits<double>::infinity();
    std::partial_sort(dist.begin(), dist.begin() + k, dist.end());
    for (int m = 0; m < k; ++m) pairs.emplace_back(i, dist[m].second);
  }
  return AreaGraph(n, pairs);
}

IVec contiguous_clusters(const Mat& coords, const AreaGraph& graph, int k, RngStream& rng) {
  const Index n = coords.rows();
  if (k < 1 || k > n) throw InputError("contiguous_clusters: bad cluster count");
  if (graph.size() != n) throw InputError("contiguous_clusters: graph size differs from coordinates");

  // k-means++ seeding.
  Mat centres(k, 2);
  centres.row(0) = coords.row(rng.uniform_int(0, n - 1));
  Vec d2 = Vec::Constant(n, std::numeric_limits<double>::infinity());
  for (int c = 1; c < k; ++c) {
    for (Index i = 0; i < n; ++i) d2(i) = std::min(d2(i), (coords.row(i) - centres.row(c - 1)).squaredNorm());
    double u = rng.uniform() * d2.sum();
    Index pick = n - 1;
    for (Index i = 0; i < n; ++i) {
      u -= d2(i);
      if (u < 0.0) {
        pick = i;
        break;
      }
    }
    centres.row(c) = coords.row(pick);
  }

  IVec label = IVec::Constant(n, -1);
  for (int iter = 0; iter < 100; ++iter) {
    bool changed = false;
    for (Index i = 0; i < n; ++i) {
      Index best = 0;
      (centres.rowwise() - coords.row(i)).rowwise().squaredNorm().minCoeff(&best);
      if (label(i) != best) {
        label(i) = static_cast<int>(best);
        changed = true;
      }
    }
    if (!changed) break;
    for (int c = 0; c < k; ++c) {
      Eigen::RowVector2d sum = Eigen::RowVector2d::Zero();
      int count = 0;
      for (Index i = 0; i < n; ++i) {
        if (label(i) == c) {
          sum += coords.row(i);
          ++count;
        }
      }
      if (count > 0) centres.row(c) = sum / count;
    }
  }

  // Repair: keep each cluster's largest connected piece and hand the other
  // pieces to the neighbouring cluster they share most edges with.
  for (int pass = 0; pass < static_cast<int>(n); ++pass) {
    bool moved = false;
    for (int c = 0; c < k && !moved; ++c) {
      std::vector<std::vector<Index>> pieces;
      std::vector<char> seen(static_cast<std::size_t>(n), 0);
      for (Index s = 0; s < n; ++s) {
        if (label(s) != c || seen[s]) continue;
        std::vector<Index> piece{s};
        seen[s] = 1;
        for (std::size_t h = 0; h < piece.size(); ++h) {
          for (Index j : graph.neighbours(piece[h])) {
            if (label(j) == c && !seen[j]) {
              seen[j] = 1;
              piece.push_back(j);
            }
          }
        }
        pieces.push_back(std::move(piece));
      }
      if (pieces.size() < 2) continue;
      std::stable_sort(pieces.begin(), pieces.end(),
                       [](const auto& a, const auto& b) { return a.size() > b.size(); });
      for (std::size_t p = 1; p < pieces.size(); ++p) {
        std::vector<int> votes(static_cast<std::size_t>(k), 0);
        for (Index i : pieces[p]) {
          for (Index j : graph.neighbours(i)) {
            if (label(j) != c) ++votes[label(j)];
          }
        }
        const auto target = std::max_element(votes.begin(), votes.end()) - votes.begin();
        if (votes[target] == 0) continue;  // isolated component of the graph itself
        for (Index i : pieces[p]) label(i) = static_cast<int>(target);
        moved = true;
      }
    }
    if (!moved) break;
  }
  return label;
}

SimLayout SimLayout::build(const SimScenario& s) {
  s.validate();
  SimLayout layout;
  layout.coords = halton_centroids(s.n_areas, s.domain);
  layout.graph = knn_graph(layout.coords, s.neighbours);
  layout.pollution_chol = gp_factor(layout.coords, s.pollution_variance, s.pollution_range);
  if (s.confounding == Confounding::B) layout.rough_chol = gp_factor(layout.coords, 1.0, s.rough_range);
  if (s.confounding == Confounding::C || s.confounding == Confounding::D) {
    layout.smooth_chol = gp_factor(layout.coords, 1.0, s.pollution_range);
  }
  return layout;
}

Vec generate_pollution_surface(const Mat& coords, RngStream& rng, double mean, double variance,
                               double range) {
  return sample_mvn(Vec::Constant(coords.rows(), mean), gp_factor(coords, variance, range), rng);
}

Vec generate_pollution_surface(const SimLayout& layout, double mean, RngStream& rng) {
  return sample_mvn(Vec::Constant(layout.coords.rows(), mean), layout.pollution_chol, rng);
}

Vec generate_confounding(Confounding scenario, double sd_phi, const SimLayout& layout,
                         const SimScenario& settings, RngStream& rng) {
  if (!(sd_phi > 0.0)) throw InputError("generate_confounding: sd_phi must be positive");
  const Index n = layout.coords.rows();
  auto gp = [&](const Mat& chol, double range) {
    const Mat factor = chol.size() > 0 ? chol : gp_factor(layout.coords, 1.0, range);
    return sample_mvn(Vec::Zero(n), factor, rng);
  };
  Vec phi;
  switch (scenario) {
    case Confounding::A: phi = rng.normal_vector(n); break;
    case Confounding::B: phi = gp(layout.rough_chol, settings.rough_range); break;
    case Confounding::C:
    case Confounding::D: phi = gp(layout.smooth_chol, settings.pollution_range); break;
  }
  centre_and_scale(phi, sd_phi);
  if (scenario == Confounding::D) {
    const int k = settings.clusters;
    const IVec label = contiguous_clusters(layout.coords, layout.graph, k, rng);
    std::vector<int> order(static_cast<std::size_t>(k));
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng.engine());
    const double j = settings.cluster_offset;
    for (Index i = 0; i < n; ++i) phi(i) += -j + 2.0 * j * order[label(i)] / (k - 1);
  }
  return phi;
}

Vec within_area_variances(const Vec& mu, Coupling coupling, double sd, double share) {
  if (!(sd >= 0.0)) throw InputError("within_area_variances: sd must be non-negative");
  const double var = sd * sd;
  if (coupling == Coupling::Independent) return Vec::Constant(mu.size(), var);
  if (!(share > 0.0 && share <= 1.0)) throw InputError("within_area_variances: share must lie in (0, 1]");
  const double m = mu.mean();
  if (!(m > 0.0)) throw InputError("within_area_variances: linear coupling needs a positive mean level");
  const double b = share * var / m;
  const double a = (1.0 - share) * var;
  Vec v = (a + b * mu.array()).matrix();
  if ((v.array() < 0.0).any()) throw NumericalError("within_area_variances: negative variance");
  return v;
}

Vec generate_within_area(double mu, double variance, Index q, RngStream& rng) {
  if (q < 1) throw InputError("generate_within_area: need at least one cell");
  if (!(variance >= 0.0)) throw NumericalError("generate_within_area: negative variance");
  const double sd = std::sqrt(variance);
  Vec w(q);
  for (Index i = 0; i < q; ++i) w(i) = mu + sd * rng.normal();
  return w;
}

DiseaseDraw generate_disease(const Vec& R, RngStream& rng, double lo, double hi) {
  if ((R.array() < 0.0).any() || !R.allFinite()) throw InputError("generate_disease: risks must be finite and >= 0");
  DiseaseDraw d{Vec(R.size()), Vec(R.size())};
  for (Index k = 0; k < R.size(); ++k) {
    d.E(k) = rng.uniform(lo, hi);
    d.Y(k) = static_cast<double>(rng.poisson(d.E(k) * R(k)));
  }
  return d;
}

std::vector<Index> draw_cell_counts(const SimScenario& s) {
  RngStream rng(s.seed, Streams::Cells);
  std::vector<Index> cells(static_cast<std::size_t>(s.n_areas));
  for (auto& c : cells) c = rng.uniform_int(s.cells_min, s.cells_max);
  return cells;
}

SimReplicate simulate_replicate(const SimScenario& s, const SimLayout& layout,
                                const std::vector<Index>& cells, int replicate) {
  const auto r = static_cast<std::uint64_t>(replicate);
  RngStream pollution_rng(s.seed, mix_keys({r, Streams::Pollution}));
  RngStream confounding_rng(s.seed, mix_keys({r, Streams::Confounding}));
  RngStream within_rng(s.seed, mix_keys({r, Streams::Within}));
  RngStream disease_rng(s.seed, mix_keys({r, Streams::Disease}));

  const Index n = s.n_areas;
  SimReplicate out;
  out.alpha = s.alpha();
  out.pollution = generate_pollution_surface(layout, s.pollution_mean, pollution_rng);
  out.phi = generate_confounding(s.confounding, s.sd_phi, layout, s, confounding_rng);

  Vec log_exposure;
  if (s.mode == ExposureMode::Point) {
    out.exposures = ExposureSet::from_points(out.pollution);
    log_exposure = out.alpha * out.pollution;
  } else {
    if (static_cast<Index>(cells.size()) != n) throw InputError("simulate_replicate: cell counts missing");
    const Vec variances = within_area_variances(out.pollution, s.coupling, s.within_sd, s.coupling_share);
    std::vector<Index> offsets{0};
    for (Index k = 0; k < n; ++k) offsets.push_back(offsets.back() + cells[k]);
    Vec conc(offsets.back()), weight(offsets.back());
    for (Index k = 0; k < n; ++k) {
      conc.segment(offsets[k], cells[k]) = generate_within_area(out.pollution(k), variances(k), cells[k], within_rng);
      weight.segment(offsets[k], cells[k]).setConstant(1.0 / static_cast<double>(cells[k]));
    }
    out.exposures = ExposureSet::normalised(std::move(offsets), std::move(conc), std::move(weight));
    ExposureTerms terms(out.exposures);
    terms.log_terms(out.alpha, ExposureLink::Aggregate, log_exposure);
  }

  const Vec risk = (out.phi + log_exposure).array().exp().matrix();
  DiseaseDraw d = generate_disease(risk, disease_rng, s.expected_lo, s.expected_hi);
  std::vector<std::string> ids(static_cast<std::size_t>(n));
  for (Index k = 0; k < n; ++k) ids[k] = "a" + std::to_string(k + 1);
  out.data = make_dataset(std::move(ids), std::move(d.Y), std::move(d.E));
  return out;
}

MetricRow evaluate(const Vec& estimates, const std::vector<std::pair<double, double>>& intervals,
                   double truth) {
  if (truth == 0.0 || !std::isfinite(truth)) throw InputError("evaluate: truth must be finite and non-zero");
  if (static_cast<Index>(intervals.size()) != estimates.size()) {
    throw InputError("evaluate: estimates and intervals differ in length");
  }
  MetricRow row;
  row.n_ok = static_cast<int>(estimates.size());
  if (estimates.size() == 0) {
    row.bias_pct = row.rmse_pct = row.coverage_pct = std::numeric_limits<double>::quiet_NaN();
    return row;
  }
  const Eigen::ArrayXd err = estimates.array() - truth;
  row.bias_pct = 100.0 * err.mean() / truth;
  row.rmse_pct = 100.0 * std::sqrt(err.square().mean()) / truth;
  int covered = 0;
  for (const auto& [lo, hi] : intervals) covered += lo <= truth && truth <= hi;
  row.coverage_pct = 100.0 * covered / static_cast<double>(intervals.size());
  return row;
}

AlphaEstimate fit_alpha(const std::string& model, const SimReplicate& rep, const AreaGraph& graph,
                        const FitConfig& config) {
  if (model == "glm") {
    const GlmFit fit = fit_glm(rep.data, rep.exposures.weighted_means());
    const Index a = fit.coefficients.size() - 1;
    return {fit.coefficients(a), fit.lower95(a), fit.upper95(a)};
  }
  const ModelSpec spec = ModelSpec::from_name(model);
  std::vector<ChainTrace> traces;
  for (int c = 0; c < config.n_chains; ++c) {
    traces.push_back(run_chain(rep.data, rep.exposures, graph, spec, config, c));
  }
  Index total = 0;
  for (const auto& t : traces) total += t.size();
  Vec alpha(total);
  Index at = 0;
  for (const auto& t : traces) {
    alpha.segment(at, t.size()) = t.alpha;
    at += t.size();
  }
  if (!alpha.allFinite()) throw FitError("fit_alpha: non-finite α draws");
  std::sort(alpha.begin(), alpha.end());
  return {alpha.mean(), quantile_sorted(alpha, 0.025), quantile_sorted(alpha, 0.975)};
}

StudyResult run_study(const SimScenario& scenario, const std::vector<std::string>& models,
                      const FitConfig& config, unsigned threads) {
  scenario.validate();
  config.validate();
  if (models.empty()) throw InputError("run_study: no models given");
  for (const auto& m : models) {
    if (m != "glm") ModelSpec::from_name(m);
  }
  const SimLayout layout = SimLayout::build(scenario);
  const std::vector<Index> cells =
      scenario.mode == ExposureMode::WithinArea ? draw_cell_counts(scenario) : std::vector<Index>{};

  const int R = scenario.replicates;
  const auto M = models.size();
  std::vector<std::vector<std::optional<AlphaEstimate>>> results(M, std::vector<std::optional<AlphaEstimate>>(R));

  parallel_for(R, worker_count(threads), [&](Index r) {
    const SimReplicate rep = simulate_replicate(scenario, layout, cells, static_cast<int>(r));
    FitConfig cfg = config;
    cfg.seed = mix_keys({config.seed, scenario.seed, static_cast<std::uint64_t>(r), Streams::Fit});
    cfg.store_phi = false;
    for (std::size_t m = 0; m < M; ++m) {
      try {
        const AlphaEstimate e = fit_alpha(models[m], rep, layout.graph, cfg);
        if (std::isfinite(e.estimate) && std::isfinite(e.lo95) && std::isfinite(e.hi95)) results[m][r] = e;
      } catch (const Error&) {
        // counted as a failed replicate below
      }
    }
  });

  StudyResult out;
  for (std::size_t m = 0; m < M; ++m) {
    std::vector<double> est;
    std::vector<std::pair<double, double>> intervals;
    Vec all = Vec::Constant(R, std::numeric_limits<double>::quiet_NaN());
    for (int r = 0; r < R; ++r) {
      if (!results[m][r]) continue;
      est.push_back(results[m][r]->estimate);
      intervals.emplace_back(results[m][r]->lo95, results[m][r]->hi95);
      all(r) = results[m][r]->estimate;
    }
    const int failed = R - static_cast<int>(est.size());
    if (failed > 0 && 20 * failed >= R) {
      throw StudyError("run_study: model " + models[m] + " failed on " + std::to_string(failed) + " of " +
                       std::to_string(R) + " replicates in scenario " + scenario.label);
    }
    MetricRow row = evaluate(Eigen::Map<const Vec>(est.data(), static_cast<Index>(est.size())), intervals,
                             scenario.alpha());
    row.scenario = scenario.label;
    row.model = models[m];
    row.n_failed = failed;
    out.rows.push_back(row);
    out.estimates.push_back(std::move(all));
  }
  return out;
}

StudyPreset study_preset(const std::string& name) {
  const bool quick = name.size() > 6 && name.substr(name.size() - 6) == "-quick";
  const std::string base = quick ? name.substr(0, name.size() - 6) : name;
  StudyPreset p;
  p.config.n_iterations = 20000;
  p.config.burn_in = 10000;
  p.config.thin = 10;
  p.config.n_chains = 1;
  p.config.store_phi = false;
  const int replicates = quick ? 3 : 100;
  if (quick) {
    p.config.n_iterations = 2000;
    p.config.burn_in = 1000;
    p.config.thin = 5;
  }
  auto sd_label = [](double v) {
    std::string s = std::to_string(v);
    s.erase(s.find_last_not_of('0') + 1);
    if (!s.empty() && s.back() == '.') s.pop_back();
    return s;
  };
  std::uint64_t seed = 1;
  if (base == "study1") {
    p.models = {"glm", "car", "local", "hh"};
    for (Confounding c : {Confounding::A, Confounding::B, Confounding::C, Confounding::D}) {
      for (double sd : {0.1, 0.01}) {
        SimScenario s;
        s.label = std::string(to_string(c)) + "-" + sd_label(sd);
        s.confounding = c;
        s.sd_phi = sd;
        s.relative_risk = 1.05;
        s.replicates = replicates;
        s.seed = seed++;
        p.scenarios.push_back(s);
      }
    }
  } else if (base == "study2") {
    p.models = {"local", "local-agg"};
    for (double rr : {1.05, 1.5}) {
      for (double sd : {1.0, 10.0}) {
        for (Coupling cp : {Coupling::Independent, Coupling::Linear}) {
          SimScenario s;
          s.label = "RR" + sd_label(rr) + "-SD" + sd_label(sd) + "-" + to_string(cp);
          s.confounding = Confounding::A;
          s.sd_phi = 0.01;
          s.relative_risk = rr;
          s.mode = ExposureMode::WithinArea;
          s.within_sd = sd;
          s.coupling = cp;
          s.replicates = replicates;
          s.seed = 100 + seed++;
          p.scenarios.push_back(s);
        }
      }
    }
  } else {
    throw InputError("unknown preset '" + name + "' (expected study1, study2, study1-quick or study2-quick)");
  }
  return p;
}

}  // namespace sre

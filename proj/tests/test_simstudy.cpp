#include "sre/simstudy.hpp"

#include <doctest.h>

#include <cmath>
#include <queue>
#include <set>

using namespace sre;

namespace {

bool connected_within(const AreaGraph& g, const IVec& labels, int label) {
  std::vector<Index> members;
  for (Index k = 0; k < labels.size(); ++k)
    if (labels(k) == label) members.push_back(k);
  if (members.empty()) return false;
  std::vector<bool> seen(static_cast<std::size_t>(labels.size()), false);
  std::queue<Index> q;
  q.push(members.front());
  seen[static_cast<std::size_t>(members.front())] = true;
  std::size_t reached = 0;
  while (!q.empty()) {
    const Index k = q.front();
    q.pop();
    ++reached;
    for (Index i : g.neighbours(k)) {
      if (labels(i) == label && !seen[static_cast<std::size_t>(i)]) {
        seen[static_cast<std::size_t>(i)] = true;
        q.push(i);
      }
    }
  }
  return reached == members.size();
}

double sample_sd(const Vec& v) { return std::sqrt((v.array() - v.mean()).square().sum() / (v.size() - 1.0)); }

}  // namespace

TEST_CASE("Halton layout") {
  const Mat c = halton_centroids(4, 600.0);
  CHECK(c(0, 0) == doctest::Approx(300.0));
  CHECK(c(0, 1) == doctest::Approx(200.0));
  CHECK(c(1, 0) == doctest::Approx(150.0));
  CHECK(c(1, 1) == doctest::Approx(400.0));
  CHECK(c(3, 0) == doctest::Approx(75.0));
}

TEST_CASE("knn graph is symmetric with minimum degree k") {
  const Mat c = halton_centroids(323, 600.0);
  const AreaGraph g = knn_graph(c, 8);
  for (Index k = 0; k < 323; ++k) CHECK(g.degree(k) >= 8);
  const Mat w = g.adjacency();
  CHECK((w - w.transpose()).norm() == 0.0);
  CHECK(connected_within(g, IVec::Zero(323), 0));
  CHECK_THROWS_AS(knn_graph(c, 0), InputError);
}

TEST_CASE("contiguous clusters") {
  const Mat c = halton_centroids(323, 600.0);
  const AreaGraph g = knn_graph(c, 8);
  RngStream rng(5);
  const IVec labels = contiguous_clusters(c, g, 5, rng);
  for (int j = 0; j < 5; ++j) CHECK(connected_within(g, labels, j));
  CHECK(labels.minCoeff() == 0);
  CHECK(labels.maxCoeff() == 4);
}

TEST_CASE("confounding surfaces have the requested spread") {
  SimScenario s;
  s.n_areas = 120;
  const SimLayout layout = SimLayout::build(s);
  for (Confounding c : {Confounding::A, Confounding::B, Confounding::C}) {
    RngStream rng(7);
    const Vec phi = generate_confounding(c, 0.1, layout, s, rng);
    CHECK(std::abs(phi.mean()) < 1e-12);
    CHECK(sample_sd(phi) == doctest::Approx(0.1).epsilon(1e-10));
  }
  RngStream rng(7);
  const Vec d = generate_confounding(Confounding::D, 0.01, layout, s, rng);
  // Offsets of +-0.3 dominate a 0.01 background.
  CHECK(d.maxCoeff() - d.minCoeff() > 0.5);
  CHECK(d.maxCoeff() - d.minCoeff() < 0.7);
}

TEST_CASE("within-area variances") {
  Vec mu(4);
  mu << 10, 20, 30, 40;
  const Vec ind = within_area_variances(mu, Coupling::Independent, 10.0);
  CHECK((ind.array() == 100.0).all());
  const Vec lin = within_area_variances(mu, Coupling::Linear, 10.0, 0.2);
  CHECK(lin.mean() == doctest::Approx(100.0).epsilon(1e-14));
  // a + b mu with b = 0.2 * 100 / 25, a = 80
  CHECK(lin(0) == doctest::Approx(80.0 + 0.8 * 10.0));
  CHECK(lin(3) == doctest::Approx(80.0 + 0.8 * 40.0));

  RngStream rng(8);
  const Vec w = generate_within_area(20.0, 4.0, 100000, rng);
  CHECK(w.mean() == doctest::Approx(20.0).epsilon(1e-3));
  CHECK(sample_sd(w) == doctest::Approx(2.0).epsilon(1e-2));
}

TEST_CASE("linear coupling ties within-area variance to the mean") {
  SimScenario s;
  s.mode = ExposureMode::WithinArea;
  s.within_sd = 10.0;
  s.coupling = Coupling::Linear;
  const SimLayout layout = SimLayout::build(s);
  const SimReplicate rep = simulate_replicate(s, layout, draw_cell_counts(s), 0);
  // Least-squares slope of per-area sample variance on mu, and its t value.
  const Index n = rep.exposures.size();
  Vec v(n);
  for (Index k = 0; k < n; ++k) {
    const Vec c = rep.exposures.concentrations(k);
    v(k) = (c.array() - c.mean()).square().sum() / (c.size() - 1.0);
  }
  const Vec mu = rep.pollution;
  const Eigen::ArrayXd dm = mu.array() - mu.mean();
  const double slope = (dm * (v.array() - v.mean())).sum() / dm.square().sum();
  const Eigen::ArrayXd resid = v.array() - v.mean() - slope * dm;
  const double se = std::sqrt(resid.square().sum() / (n - 2.0) / dm.square().sum());
  CHECK(slope > 0.0);
  CHECK(slope / se > 2.6);  // one-sided p < 0.01 at this n
}

TEST_CASE("disease counts") {
  RngStream rng(9);
  const DiseaseDraw d = generate_disease(Vec::Constant(5000, 1.2), rng);
  CHECK(d.E.minCoeff() >= 70.0);
  CHECK(d.E.maxCoeff() <= 130.0);
  CHECK(d.Y.sum() / d.E.sum() == doctest::Approx(1.2).epsilon(0.01));
  CHECK((d.Y.array() == d.Y.array().round()).all());
}

TEST_CASE("metrics by hand") {
  Vec est(3);
  est << 1.1, 0.9, 1.2;
  const std::vector<std::pair<double, double>> ci{{0.9, 1.3}, {0.8, 0.95}, {0.99, 1.5}};
  const MetricRow r = evaluate(est, ci, 1.0);
  CHECK(r.bias_pct == doctest::Approx(20.0 / 3.0));
  CHECK(r.rmse_pct == doctest::Approx(100.0 * std::sqrt(0.02)));
  CHECK(r.coverage_pct == doctest::Approx(200.0 / 3.0));
  CHECK(r.n_ok == 3);
  CHECK_THROWS_AS(evaluate(est, ci, 0.0), InputError);
}

TEST_CASE("replicates are deterministic and consistent") {
  SimScenario s;
  s.n_areas = 80;
  s.mode = ExposureMode::WithinArea;
  s.within_sd = 10.0;
  s.relative_risk = 1.5;
  const SimLayout layout = SimLayout::build(s);
  const auto cells = draw_cell_counts(s);
  REQUIRE(cells.size() == 80);
  for (Index q : cells) {
    CHECK(q >= 10);
    CHECK(q <= 400);
  }
  const SimReplicate a = simulate_replicate(s, layout, cells, 0);
  const SimReplicate b = simulate_replicate(s, layout, cells, 0);
  const SimReplicate c = simulate_replicate(s, layout, cells, 1);
  CHECK(a.data.Y == b.data.Y);
  CHECK(a.exposures.concentration() == b.exposures.concentration());
  CHECK(a.data.Y != c.data.Y);
  CHECK(a.alpha == doctest::Approx(0.5 * std::log(1.5)));
  CHECK(a.exposures.cells(3) == cells[3]);
  CHECK((a.exposures.weight().array() > 0).all());
}

TEST_CASE("study runner") {
  SimScenario s;
  s.label = "tiny";
  s.n_areas = 60;
  s.replicates = 4;
  FitConfig c;
  c.n_iterations = 1000;
  c.burn_in = 500;
  c.thin = 5;
  const StudyResult one = run_study(s, {"glm", "car"}, c, 1);
  const StudyResult two = run_study(s, {"glm", "car"}, c, 2);
  REQUIRE(one.rows.size() == 2);
  CHECK(one.rows[0].model == "glm");
  CHECK(one.rows[0].scenario == "tiny");
  CHECK(one.rows[1].n_ok + one.rows[1].n_failed == 4);
  CHECK(one.estimates[1] == two.estimates[1]);
  CHECK(one.estimates[0] == two.estimates[0]);
  CHECK_THROWS_AS(run_study(s, {"lm"}, c, 1), InputError);
}

TEST_CASE("presets") {
  const StudyPreset s1 = study_preset("study1");
  CHECK(s1.scenarios.size() == 8);
  CHECK(s1.models == std::vector<std::string>{"glm", "car", "local", "hh"});
  std::set<std::string> labels;
  for (const auto& sc : s1.scenarios) labels.insert(sc.label);
  CHECK(labels.count("D-0.01") == 1);

  const StudyPreset s2 = study_preset("study2");
  CHECK(s2.scenarios.size() == 8);
  CHECK(s2.scenarios[7].label == "RR1.5-SD10-linear");
  CHECK(s2.scenarios[7].mode == ExposureMode::WithinArea);

  const StudyPreset q = study_preset("study2-quick");
  CHECK(q.scenarios.front().replicates == 3);
  CHECK_THROWS_AS(study_preset("study3"), InputError);
}

TEST_CASE("scenario validation") {
  SimScenario s;
  CHECK_NOTHROW(s.validate());
  s.relative_risk = 0.0;
  CHECK_THROWS_AS(s.validate(), InputError);
  s = SimScenario{};
  s.cells_min = 0;
  CHECK_THROWS_AS(s.validate(), InputError);
  CHECK(confounding_from_string("C") == Confounding::C);
  CHECK(coupling_from_string("linear") == Coupling::Linear);
  CHECK_THROWS_AS(exposure_mode_from_string("grid"), InputError);
}

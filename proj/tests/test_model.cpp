#include "sre/model.hpp"
#include "sre/numerics.hpp"

#include <doctest.h>

#include <cmath>

using namespace sre;

TEST_CASE("aggregate link worked value") {
  Vec w(2), p(2);
  w << 10, 20;
  p << 0.5, 0.5;
  // 0.5 e^0.5 + 0.5 e^1.0
  CHECK(aggregate_link(w, p, 0.05) == doctest::Approx(2.183501549579587).epsilon(1e-14));
  CHECK(log_aggregate_link(w, p, 0.05) ==
        doctest::Approx(std::log(2.183501549579587)).epsilon(1e-14));
  CHECK(weighted_mean_exposure(w, p) == 15.0);
}

TEST_CASE("aggregate link reduces to the ecological link") {
  RngStream rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const double alpha = rng.uniform(-0.5, 0.5);
    Vec one(1), unit(1);
    one << rng.uniform(0, 50);
    unit << 1.0;
    CHECK(log_aggregate_link(one, unit, alpha) == doctest::Approx(alpha * one(0)).epsilon(1e-14));

    // Identical cells collapse to one.
    const Vec same = Vec::Constant(7, one(0));
    const Vec p = Vec::Constant(7, 1.0 / 7.0);
    CHECK(log_aggregate_link(same, p, alpha) == doctest::Approx(alpha * one(0)).epsilon(1e-12));
  }
  Vec w = Vec::LinSpaced(5, 1, 30);
  Vec p = Vec::Constant(5, 0.2);
  CHECK(aggregate_link(w, p, 0.0) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("aggregate link Jensen inequality") {
  RngStream rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    const Index m = 2 + static_cast<Index>(rng.uniform_int(0, 20));
    Vec w(m), p(m);
    for (Index i = 0; i < m; ++i) {
      w(i) = rng.uniform(0, 60);
      p(i) = rng.uniform(0.1, 1.0);
    }
    p /= p.sum();
    const double alpha = rng.uniform(-0.3, 0.3);
    CHECK(log_aggregate_link(w, p, alpha) >= alpha * weighted_mean_exposure(w, p) - 1e-12);
  }
}

TEST_CASE("aggregate link is stable for large exponents") {
  Vec w(2), p(2);
  w << 2000, 2010;
  p << 0.5, 0.5;
  const double v = log_aggregate_link(w, p, 1.0);
  CHECK(std::isfinite(v));
  CHECK(v == doctest::Approx(2010.0 + std::log(0.5 + 0.5 * std::exp(-10.0))).epsilon(1e-14));
}

TEST_CASE("Poisson log-likelihood by hand") {
  Vec Y(1), E(1);
  Y << 2;
  E << 2;
  const HealthDataset data = make_dataset({"a"}, Y, E);
  Vec w(1);
  w << 5.0;
  const ExposureSet x = ExposureSet::from_points(w);
  ModelParams params;
  params.beta = Vec::Zero(1);
  params.alpha = 0.0;
  params.phi = Vec::Zero(1);
  // 2 log 2 - 2 - log 2!
  CHECK(log_likelihood(data, x, params) == doctest::Approx(-1.3068528194400546).epsilon(1e-14));
  params.link = ExposureLink::Aggregate;
  CHECK(log_likelihood(data, x, params) == doctest::Approx(-1.3068528194400546).epsilon(1e-14));
}

TEST_CASE("relative risk for an increment") {
  CHECK(relative_risk_for_increment(0.0244, 2.0) == doctest::Approx(1.050010327672887).epsilon(1e-14));
  CHECK(relative_risk_for_increment(0.203, 2.0) == doctest::Approx(1.50080255245802).epsilon(1e-14));
  CHECK(gaussian_bias_term(2.0, 0.203) == doctest::Approx(0.041209).epsilon(1e-12));
}

TEST_CASE("dataset validation") {
  Vec Y(2), E(2);
  Y << 1, 2;
  E << 1, 1;
  CHECK_NOTHROW(make_dataset({"a", "b"}, Y, E));
  Vec bad_e = E;
  bad_e(1) = 0.0;
  CHECK_THROWS_AS(make_dataset({"a", "b"}, Y, bad_e), InputError);
  Vec bad_y = Y;
  bad_y(0) = 1.5;
  CHECK_THROWS_AS(make_dataset({"a", "b"}, bad_y, E), InputError);
  bad_y(0) = -1.0;
  CHECK_THROWS_AS(make_dataset({"a", "b"}, bad_y, E), InputError);
  CHECK_THROWS_AS(make_dataset({"a", "a"}, Y, E), InputError);
}

TEST_CASE("exposure weights must sum to one") {
  Vec c(3), w(3);
  c << 1, 2, 3;
  w << 0.5, 0.5, 1.0;
  CHECK_NOTHROW(ExposureSet({0, 2, 3}, c, w));
  w(0) = 0.6;
  CHECK_THROWS_AS(ExposureSet({0, 2, 3}, c, w), InputError);
  const ExposureSet n = ExposureSet::normalised({0, 2, 3}, c, Vec::Constant(3, 4.0));
  CHECK(n.weights(0).sum() == doctest::Approx(1.0));
  CHECK(n.weighted_means()(0) == doctest::Approx(1.5));
  CHECK(n.weighted_means()(1) == doctest::Approx(3.0));
  w << -0.5, 1.5, 1.0;
  CHECK_THROWS_AS(ExposureSet({0, 2, 3}, c, w), InputError);
}

TEST_CASE("vectorised exposure terms match the scalar links") {
  RngStream rng(12);
  std::vector<Index> offsets{0};
  std::vector<double> conc, wt;
  for (Index k = 0; k < 30; ++k) {
    const Index m = 1 + static_cast<Index>(rng.uniform_int(0, 12));
    double total = 0.0;
    std::vector<double> raw(static_cast<std::size_t>(m));
    for (auto& r : raw) total += (r = rng.uniform(0.1, 1.0));
    for (Index i = 0; i < m; ++i) {
      conc.push_back(rng.uniform(5, 40));
      wt.push_back(raw[static_cast<std::size_t>(i)] / total);
    }
    offsets.push_back(offsets.back() + m);
  }
  const ExposureSet x(offsets, Eigen::Map<Vec>(conc.data(), static_cast<Index>(conc.size())),
                      Eigen::Map<Vec>(wt.data(), static_cast<Index>(wt.size())));
  const ExposureTerms terms(x);
  Vec eco, agg, slope;
  for (double alpha : {-0.2, 0.0, 0.05, 0.3}) {
    terms.log_terms(alpha, ExposureLink::Ecological, eco);
    terms.log_terms(alpha, ExposureLink::Aggregate, agg);
    terms.slopes(alpha, ExposureLink::Aggregate, slope);
    for (Index k = 0; k < 30; ++k) {
      CHECK(eco(k) == doctest::Approx(alpha * x.weighted_means()(k)).epsilon(1e-13));
      CHECK(agg(k) == doctest::Approx(log_aggregate_link(x.concentrations(k), x.weights(k), alpha))
                          .epsilon(1e-12));
      // Central difference of the aggregate term.
      const double h = 1e-6;
      const double fd = (log_aggregate_link(x.concentrations(k), x.weights(k), alpha + h) -
                         log_aggregate_link(x.concentrations(k), x.weights(k), alpha - h)) /
                        (2 * h);
      CHECK(slope(k) == doctest::Approx(fd).epsilon(1e-6));
    }
  }
}

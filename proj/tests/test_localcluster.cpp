#include "sre/localcluster.hpp"

#include <doctest.h>

#include <cmath>

using namespace sre;

TEST_CASE("allocation prior for G = 5") {
  const double expected[5] = {0.010333864010783306, 0.20756120714778833, 0.5642098576828567,
                              0.20756120714778833, 0.010333864010783306};
  const Vec f = allocation_prior_vector(1.0, 5);
  for (int z = 1; z <= 5; ++z) {
    CHECK(f(z - 1) == doctest::Approx(expected[z - 1]).epsilon(1e-14));
    CHECK(allocation_prior(z, 1.0, 5) == doctest::Approx(expected[z - 1]).epsilon(1e-14));
  }
  CHECK(f.sum() == doctest::Approx(1.0).epsilon(1e-15));
  CHECK((allocation_log_prior_vector(1.0, 5).array().exp().matrix() - f).norm() < 1e-15);
}

TEST_CASE("allocation prior limits") {
  const Vec flat = allocation_prior_vector(0.0, 7);
  CHECK((flat.array() - 1.0 / 7.0).abs().maxCoeff() < 1e-15);
  const Vec sharp = allocation_prior_vector(100.0, 3);
  CHECK(sharp(1) == doctest::Approx(1.0).epsilon(1e-15));
  IVec z(3);
  z << 1, 2, 3;
  CHECK(allocation_log_prior(z, 0.0, 3) == doctest::Approx(3 * std::log(1.0 / 3.0)));
}

TEST_CASE("allocation draw frequencies") {
  ClusterState s;
  s.G = 3;
  s.lambda = Vec::LinSpaced(3, -1, 1);
  s.Z = IVec::Constant(1, 2);
  s.delta = 0.5;
  Vec ll(3);
  ll << -1.0, -1.5, -0.2;
  const double expected[3] = {0.2366560913555668, 0.23665609135556678, 0.5266878172888663};
  RngStream rng(31);
  const int n = 200000;
  int counts[3] = {0, 0, 0};
  for (int i = 0; i < n; ++i) ++counts[sample_allocation(0, s, ll, rng) - 1];
  for (int j = 0; j < 3; ++j) {
    const double sd = std::sqrt(expected[j] * (1 - expected[j]) / n);
    CHECK(std::abs(counts[j] / double(n) - expected[j]) < 4.0 * sd);
  }
}

TEST_CASE("allocation draw edge cases") {
  RngStream rng(2);
  const Vec prior = allocation_log_prior_vector(1.0, 3);
  Vec ll(3);
  ll << -1e300, 0.0, -1e300;
  for (int i = 0; i < 100; ++i) CHECK(draw_allocation(prior, ll, rng) == 2);
  const double inf = std::numeric_limits<double>::infinity();
  ll << -inf, -inf, -inf;
  CHECK_THROWS_AS(draw_allocation(prior, ll, rng), NumericalError);
  ll << -inf, -inf, 0.0;
  CHECK(draw_allocation(prior, ll, rng) == 3);
}

TEST_CASE("ClusterState validation") {
  ClusterState s;
  s.G = 3;
  s.lambda = Vec::LinSpaced(3, -1, 1);
  s.Z = IVec::Constant(4, 2);
  CHECK_NOTHROW(s.validate());
  s.G = 4;
  s.lambda = Vec::LinSpaced(4, -1, 1);
  CHECK_THROWS_AS(s.validate(), InputError);
  s.G = 3;
  s.lambda = Vec::LinSpaced(3, -1, 1);
  s.lambda(2) = s.lambda(1);
  CHECK_THROWS_AS(s.validate(), InputError);
  s.lambda << -1, 0, 1;
  s.Z(0) = 4;
  CHECK_THROWS_AS(s.validate(), InputError);
  s.Z(0) = 1;
  s.delta = -0.1;
  CHECK_THROWS_AS(s.validate(), InputError);
}

TEST_CASE("reflection keeps proposals inside the bounds") {
  CHECK(reflect_into(1.5, 0.0, 1.0) == doctest::Approx(0.5));
  CHECK(reflect_into(-0.25, 0.0, 1.0) == doctest::Approx(0.25));
  CHECK(reflect_into(2.25, 0.0, 1.0) == doctest::Approx(0.25));
  CHECK(reflect_into(-3.0, 0.0, std::numeric_limits<double>::infinity()) == doctest::Approx(3.0));
  CHECK(reflect_into(0.4, 0.0, 1.0) == 0.4);
}

TEST_CASE("lambda updates preserve the ordering") {
  ClusterState s;
  s.G = 5;
  s.lambda = Vec::LinSpaced(5, -0.4, 0.4);
  s.Z = IVec::Constant(1, 3);
  RngStream rng(40);
  for (int it = 0; it < 2000; ++it) {
    for (int i = 1; i <= 5; ++i) {
      const auto step = sample_lambda(i, s, [](double v) { return -v * v; }, 1.0, rng);
      s.lambda(i - 1) = step.value;
      for (int j = 1; j < 5; ++j) REQUIRE(s.lambda(j) > s.lambda(j - 1));
    }
  }
  CHECK_THROWS_AS(sample_lambda(0, s, [](double) { return 0.0; }, 1.0, rng), InputError);
}

TEST_CASE("delta sampler targets the allocation likelihood") {
  // All 50 labels at the middle class: target prop to (1 + 2 e^-delta)^-50 on
  // [0, 10]. Exact mean by trapezoid integration.
  ClusterState s;
  s.G = 3;
  s.lambda = Vec::LinSpaced(3, -1, 1);
  s.Z = IVec::Constant(50, 2);
  s.delta = 1.0;
  s.delta_max = 10.0;
  const Vec grid = Vec::LinSpaced(100001, 0.0, 10.0);
  const Eigen::ArrayXd dens = (-50.0 * (1.0 + 2.0 * (-grid.array()).exp()).log()).exp();
  const double mass = dens.sum() - 0.5 * (dens(0) + dens(100000));
  const Eigen::ArrayXd moment = dens * grid.array();
  const double exact = (moment.sum() - 0.5 * (moment(0) + moment(100000))) / mass;

  RngStream rng(41);
  double sum = 0.0;
  int accepted = 0;
  const int n = 50000;
  for (int i = 0; i < n; ++i) {
    const auto step = sample_delta(s, 1.0, rng);
    s.delta = step.value;
    REQUIRE(s.delta >= 0.0);
    REQUIRE(s.delta <= 10.0);
    sum += s.delta;
    accepted += step.accepted;
  }
  CHECK(std::abs(sum / n - exact) < 0.1);
  CHECK(accepted > n / 10);
}

TEST_CASE("initial clusters") {
  Vec r(10);
  r << -0.5, -0.4, -0.3, -0.2, -0.1, 0.1, 0.2, 0.3, 0.4, 0.5;
  const ClusterState s = initial_clusters(r, 5);
  CHECK_NOTHROW(s.validate());
  CHECK(s.Z(0) == 1);
  CHECK(s.Z(9) == 5);
  const ClusterState tied = initial_clusters(Vec::Zero(10), 3);
  CHECK_NOTHROW(tied.validate());
}

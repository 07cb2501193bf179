#include "sre/car.hpp"

#include <doctest.h>

#include <cmath>

using namespace sre;

namespace {

AreaGraph path3() {
  const std::vector<std::pair<Index, Index>> p{{0, 1}, {1, 2}};
  return AreaGraph(3, p);
}

AreaGraph random_graph(Index n, double edge_prob, RngStream& rng) {
  std::vector<std::pair<Index, Index>> pairs;
  for (Index k = 0; k < n; ++k)
    for (Index i = k + 1; i < n; ++i)
      if (rng.uniform() < edge_prob) pairs.emplace_back(k, i);
  return AreaGraph(n, pairs);
}

}  // namespace

TEST_CASE("Leroux precision on a path") {
  Mat expected(3, 3);
  expected << 1, -0.5, 0, -0.5, 1.5, -0.5, 0, -0.5, 1;
  CHECK((leroux_precision(path3(), 0.5) - expected).norm() < 1e-15);
  CHECK((leroux_precision(path3(), 0.0) - Mat::Identity(3, 3)).norm() == 0.0);
  CHECK((leroux_precision(path3(), 1.0) - path3().laplacian()).norm() == 0.0);
}

TEST_CASE("full conditional by hand") {
  // Area 1 of the path, neighbours with values 1 and 3.
  CarState s;
  s.theta = Vec(3);
  s.theta << 1, 0, 3;
  s.rho = 0.5;
  s.tau2 = 0.7;
  const Conditional c = full_conditional_theta(1, s, path3());
  CHECK(c.mean == doctest::Approx(2.0 / 1.5).epsilon(1e-15));
  CHECK(c.variance == doctest::Approx(0.7 / 1.5).epsilon(1e-15));

  s.rho = 1.0;
  const std::vector<std::pair<Index, Index>> one{{0, 1}};
  s.theta = Vec::Zero(3);
  CHECK_THROWS_AS(full_conditional_theta(2, s, AreaGraph(3, one)), InputError);
}

TEST_CASE("partial correlation by hand") {
  const std::vector<std::pair<Index, Index>> pairs{{0, 1}, {0, 2}, {0, 3}, {1, 4}};
  const AreaGraph g(5, pairs);
  // Degrees 3 and 2 at rho 0.5.
  CHECK(partial_correlation(g, 0.5, 0, 1) == doctest::Approx(0.2886751345948129).epsilon(1e-14));
  CHECK(partial_correlation(g, 0.5, 0, 4) == 0.0);
}

TEST_CASE("conditionals agree with the precision matrix") {
  RngStream rng(77);
  for (int trial = 0; trial < 20; ++trial) {
    const AreaGraph g = random_graph(12, 0.25, rng);
    CarState s;
    s.theta = rng.normal_vector(12);
    s.rho = rng.uniform(0.01, 0.99);
    s.tau2 = rng.uniform(0.1, 2.0);
    const Mat q = leroux_precision(g, s.rho);
    for (Index k = 0; k < 12; ++k) {
      const Conditional c = full_conditional_theta(k, s, g);
      const double off = q.row(k).dot(s.theta) - q(k, k) * s.theta(k);
      CHECK(std::abs(c.mean + off / q(k, k)) < 1e-10);
      CHECK(std::abs(c.variance - s.tau2 / q(k, k)) < 1e-10);
      for (Index i = 0; i < 12; ++i) {
        if (i == k) continue;
        const double pc = -q(k, i) / std::sqrt(q(k, k) * q(i, i));
        CHECK(std::abs(partial_correlation(g, s.rho, k, i) - pc) < 1e-10);
      }
    }
  }
}

TEST_CASE("quadratic form matches the dense product") {
  RngStream rng(5);
  const AreaGraph g = random_graph(25, 0.15, rng);
  const Vec theta = rng.normal_vector(25);
  for (double rho : {0.0, 0.3, 0.9, 1.0}) {
    const double dense = theta.dot(leroux_precision(g, rho) * theta);
    CHECK(leroux_quadratic_form(g, theta, rho) == doctest::Approx(dense).epsilon(1e-12));
  }
}

TEST_CASE("spectral log det equals the Cholesky route") {
  RngStream rng(6);
  const AreaGraph g = random_graph(40, 0.1, rng);
  const LerouxLogDet logdet(g);
  for (double rho : {0.0, 0.01, 0.5, 0.9, 0.999}) {
    CHECK(logdet(rho) == doctest::Approx(leroux_log_det_cholesky(g, rho)).epsilon(1e-10));
  }
  CHECK(logdet(0.0) == doctest::Approx(0.0).scale(1.0));
}

TEST_CASE("tau2 draw has the conjugate posterior") {
  // One isolated area, rho 0.3, theta 2: scale b + 0.7 * 4 / 2 = b + 1.4.
  const AreaGraph g(1, std::span<const std::pair<Index, Index>>{});
  Vec theta(1);
  theta << 2.0;
  const double a = 1.0, b = 0.01;
  RngStream rng(13);
  const int n = 200000;
  double precision_sum = 0.0;
  for (int i = 0; i < n; ++i) precision_sum += 1.0 / sample_tau2(theta, 0.3, g, a, b, rng);
  // 1 / tau2 ~ Gamma(a + 1/2, rate b + 1.4)
  const double mean = (a + 0.5) / (b + 1.4);
  const double sd = std::sqrt(a + 0.5) / (b + 1.4) / std::sqrt(double(n));
  CHECK(std::abs(precision_sum / n - mean) < 4.0 * sd);
}

TEST_CASE("sample_leroux covariance") {
  const AreaGraph g = path3();
  RngStream rng(19);
  const int n = 100000;
  Mat acc = Mat::Zero(3, 3);
  for (int i = 0; i < n; ++i) {
    const Vec t = sample_leroux(g, 0.5, 2.0, rng);
    acc += t * t.transpose();
  }
  const Mat cov = 2.0 * leroux_precision(g, 0.5).inverse();
  CHECK(((acc / n) - cov).cwiseAbs().maxCoeff() < 0.05);
}

TEST_CASE("CarState validation") {
  CarState s;
  s.theta = Vec::Zero(2);
  CHECK_NOTHROW(s.validate());
  s.rho = 1.2;
  CHECK_THROWS_AS(s.validate(), InputError);
  s.rho = 0.5;
  s.tau2 = 0.0;
  CHECK_THROWS_AS(s.validate(), InputError);
}

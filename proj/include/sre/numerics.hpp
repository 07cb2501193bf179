#pragma once

#include "sre/types.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>

namespace sre {

// SplitMix64 finaliser; used to turn (seed, stream-id, ...) tuples into
// well-separated engine seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t mix_keys(std::initializer_list<std::uint64_t> keys) {
  std::uint64_t h = 0x6a09e667f3bcc909ULL;
  for (auto k : keys) h = splitmix64(h ^ splitmix64(k));
  return h;
}

/// Independent pseudo-random stream keyed by (seed, stream-id).
///
/// Two streams built from the same pair produce identical sequences; distinct
/// stream ids give statistically independent sequences. Not thread-safe: each
/// chain or worker owns its own stream.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed, std::uint64_t stream = 0)
      : seed_(seed), stream_(stream) {
    const std::uint64_t key = mix_keys({seed, stream});
    std::seed_seq seq{static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(seed)};
    engine_.seed(seq);
  }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

  // Uniform on [0, 1).
  double uniform() { return std::generate_canonical<double, 53>(engine_); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal() { return normal_(engine_); }
  double normal(double mean, double sd) { return mean + sd * normal_(engine_); }

  double gamma(double shape, double scale) {
    return std::gamma_distribution<double>(shape, scale)(engine_);
  }

  std::int64_t poisson(double mean) {
    if (mean <= 0.0) return 0;
    return std::poisson_distribution<std::int64_t>(mean)(engine_);
  }

  // Uniform integer on [lo, hi].
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    return std::uniform_int_distribution<std::int64_t>(lo, hi)(engine_);
  }

  Vec normal_vector(Index n) {
    Vec z(n);
    for (Index i = 0; i < n; ++i) z(i) = normal();
    return z;
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

template <typename Derived>
bool is_symmetric(const Eigen::MatrixBase<Derived>& m, typename Derived::RealScalar rel_tol = 1e-12) {
  if (m.rows() != m.cols()) return false;
  const auto scale = std::max<typename Derived::RealScalar>(m.cwiseAbs().maxCoeff(), 1);
  return (m - m.transpose()).cwiseAbs().maxCoeff() <= rel_tol * scale;
}

/// Lower Cholesky factor L with L Lᵀ = m. Throws NumericalError when m is not
/// symmetric positive definite.
template <typename Derived>
MatrixX<typename Derived::Scalar> cholesky(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  if (!is_symmetric(m)) throw InputError("cholesky: matrix is not symmetric");
  Eigen::LLT<MatrixX<Scalar>> llt(m);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("cholesky: matrix is not positive definite");
  }
  return llt.matrixL();
}

template <typename Scalar>
Scalar log_det_from_cholesky(const MatrixX<Scalar>& lower) {
  return Scalar(2) * lower.diagonal().array().log().sum();
}

template <typename Scalar>
struct SymEigen {
  VectorX<Scalar> values;   // descending
  MatrixX<Scalar> vectors;  // column j pairs with values(j)
};

template <typename Derived>
SymEigen<typename Derived::Scalar> sym_eigen(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  if (m.rows() != m.cols()) throw InputError("sym_eigen: matrix is not square");
  Eigen::SelfAdjointEigenSolver<MatrixX<Scalar>> solver(m);
  if (solver.info() != Eigen::Success) throw NumericalError("sym_eigen: solver did not converge");
  // Eigen returns ascending order.
  SymEigen<Scalar> out;
  out.values = solver.eigenvalues().reverse();
  out.vectors = solver.eigenvectors().rowwise().reverse();
  return out;
}

template <typename Scalar>
Scalar matern52(Scalar distance, Scalar variance, Scalar range) {
  using std::exp;
  using std::sqrt;
  const Scalar s = sqrt(Scalar(5)) * distance / range;
  return variance * (Scalar(1) + s + s * s / Scalar(3)) * exp(-s);
}

/// Matérn covariance (smoothness 5/2) between planar points, one per row.
template <typename Derived>
MatrixX<typename Derived::Scalar> matern_covariance(const Eigen::MatrixBase<Derived>& coords,
                                                    typename Derived::Scalar variance,
                                                    typename Derived::Scalar range,
                                                    typename Derived::Scalar smoothness = 2.5) {
  using Scalar = typename Derived::Scalar;
  if (!(variance > 0) || !(range > 0)) {
    throw InputError("matern_covariance: variance and range must be positive");
  }
  if (smoothness != Scalar(2.5)) {
    throw InputError("matern_covariance: only smoothness 2.5 is implemented");
  }
  if (coords.cols() != 2) throw InputError("matern_covariance: coordinates must have 2 columns");
  const Index n = coords.rows();
  MatrixX<Scalar> c(n, n);
  for (Index j = 0; j < n; ++j) {
    c(j, j) = variance;
    for (Index i = j + 1; i < n; ++i) {
      const Scalar d = (coords.row(i) - coords.row(j)).norm();
      c(i, j) = c(j, i) = matern52(d, variance, range);
    }
  }
  return c;
}

/// mean + L z with z standard normal drawn from rng.
inline Vec sample_mvn(const Vec& mean, const Mat& chol_lower, RngStream& rng) {
  if (chol_lower.rows() != mean.size() || chol_lower.cols() != mean.size()) {
    throw InputError("sample_mvn: dimension mismatch");
  }
  const Vec z = rng.normal_vector(mean.size());
  return mean + chol_lower.triangularView<Eigen::Lower>() * z;
}

// Empirical quantile with linear interpolation between order statistics
// (the "type 7" definition). `sorted` must be ascending.
inline double quantile_sorted(const Vec& sorted, double p) {
  const Index n = sorted.size();
  if (n == 0) throw InputError("quantile of empty sample");
  if (n == 1) return sorted(0);
  const double h = p * static_cast<double>(n - 1);
  const auto lo = static_cast<Index>(std::floor(h));
  const Index hi = std::min<Index>(lo + 1, n - 1);
  return sorted(lo) + (h - static_cast<double>(lo)) * (sorted(hi) - sorted(lo));
}

}  // namespace sre

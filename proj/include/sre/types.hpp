#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace sre {

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using IVec = Eigen::VectorXi;
using Index = Eigen::Index;

// Base of everything thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input or a violated precondition (unknown ids, bad weights, ...).
class InputError : public Error {
 public:
  using Error::Error;
};

// A factorisation or evaluation that cannot be completed numerically.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// Sampler or estimator failure (non-finite start, IRLS divergence, ...).
class FitError : public Error {
 public:
  using Error::Error;
};

}  // namespace sre

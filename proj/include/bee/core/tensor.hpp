#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "bee/core/rng.hpp"

namespace bee {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// A named trainable tensor. Vectors are stored as n x 1 matrices.
/// The gradient always has the same shape as the value and is accumulated
/// (+=) by backward passes until an optimizer step consumes it.
struct ParamTensor {
  std::string name;
  MatrixXd value;
  MatrixXd grad;

  ParamTensor() = default;
  ParamTensor(std::string n, MatrixXd v)
      : name(std::move(n)), value(std::move(v)) {
    grad = MatrixXd::Zero(value.rows(), value.cols());
  }

  void zero_grad() { grad.setZero(); }

  static ParamTensor randn(const std::string& name, int rows, int cols,
                           double stddev, Rng& rng) {
    MatrixXd m(rows, cols);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) m(i, j) = stddev * rng.normal();
    return ParamTensor(name, std::move(m));
  }

  static ParamTensor zeros(const std::string& name, int rows, int cols) {
    return ParamTensor(name, MatrixXd::Zero(rows, cols));
  }
};

/// FNV-1a over the raw value bytes of a parameter list; used by tests to
/// assert that a training path left a model untouched.
std::uint64_t param_hash(const std::vector<const ParamTensor*>& params);

}  // namespace bee

#pragma once

#include "bee/core/tensor.hpp"

namespace bee {

/// Power-iteration estimate of the largest singular value of one weight
/// matrix, with the left/right vector estimates persisted across calls so a
/// single iteration per training step tracks slowly moving weights.
class SpectralNorm {
 public:
  SpectralNorm() = default;
  SpectralNorm(int rows, int cols, Rng& rng);

  /// Runs `power_iters` iterations against W, updates the persistent
  /// vectors, and returns the estimate (clamped to >= 1e-12).
  double estimate(const MatrixXd& w, int power_iters);

  /// sigma = u^T W v with the persistent vectors held fixed. Linear in W,
  /// so d(sigma)/dW = u v^T exactly; used by backward passes.
  double sigma_frozen(const MatrixXd& w) const;

  const VectorXd& u() const { return u_; }
  const VectorXd& v() const { return v_; }

 private:
  VectorXd u_, v_;
};

/// weight / sigma_hat. Zero matrices come back unchanged because the
/// estimate is clamped away from zero.
MatrixXd spectral_normalize(const MatrixXd& weight, int power_iters,
                            SpectralNorm& state);

}  // namespace bee

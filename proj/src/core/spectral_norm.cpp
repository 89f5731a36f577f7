#include "bee/core/spectral_norm.hpp"

#include <stdexcept>

namespace bee {

namespace {
constexpr double kSigmaFloor = 1e-12;
}

SpectralNorm::SpectralNorm(int rows, int cols, Rng& rng) {
  u_ = VectorXd(rows);
  for (int i = 0; i < rows; ++i) u_(i) = rng.normal();
  const double n = u_.norm();
  u_ = n > 0.0 ? VectorXd(u_ / n) : VectorXd::Unit(rows, 0);
  v_ = VectorXd::Zero(cols);
}

double SpectralNorm::estimate(const MatrixXd& w, int power_iters) {
  if (power_iters < 1)
    throw std::invalid_argument("SpectralNorm: power_iters must be >= 1");
  if (u_.size() != w.rows())
    throw std::invalid_argument("SpectralNorm: shape mismatch");
  for (int it = 0; it < power_iters; ++it) {
    VectorXd v = w.transpose() * u_;
    double vn = v.norm();
    if (vn <= kSigmaFloor) return kSigmaFloor;  // zero (or numerically dead) matrix
    v_ = v / vn;
    VectorXd u = w * v_;
    double un = u.norm();
    if (un <= kSigmaFloor) return kSigmaFloor;
    u_ = u / un;
  }
  return std::max(kSigmaFloor, u_.dot(w * v_));
}

double SpectralNorm::sigma_frozen(const MatrixXd& w) const {
  if (v_.size() != w.cols() || u_.size() != w.rows())
    throw std::logic_error("SpectralNorm::sigma_frozen before any estimate");
  return std::max(kSigmaFloor, u_.dot(w * v_));
}

MatrixXd spectral_normalize(const MatrixXd& weight, int power_iters,
                            SpectralNorm& state) {
  const double sigma = state.estimate(weight, power_iters);
  return weight / sigma;
}

}  // namespace bee

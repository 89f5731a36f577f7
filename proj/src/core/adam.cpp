#include "bee/core/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace bee {

void AdamOptimizer::attach(ParamTensor* p) {
  Slot s;
  s.param = p;
  s.m = MatrixXd::Zero(p->value.rows(), p->value.cols());
  s.v = MatrixXd::Zero(p->value.rows(), p->value.cols());
  slots_.push_back(std::move(s));
}

void AdamOptimizer::attach(const std::vector<ParamTensor*>& ps) {
  for (ParamTensor* p : ps) attach(p);
}

void AdamOptimizer::step() {
  for (const Slot& s : slots_) {
    if (!s.param->grad.allFinite())
      throw std::runtime_error("AdamOptimizer: non-finite gradient in tensor '" +
                               s.param->name + "'");
  }
  ++step_count_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(step_count_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(step_count_));
  for (Slot& s : slots_) {
    const MatrixXd& g = s.param->grad;
    s.m = beta1_ * s.m + (1.0 - beta1_) * g;
    s.v = beta2_ * s.v + (1.0 - beta2_) * g.cwiseProduct(g);
    const MatrixXd m_hat = s.m / bc1;
    const MatrixXd v_hat = s.v / bc2;
    s.param->value.array() -=
        lr_ * m_hat.array() / (v_hat.array().sqrt() + eps_);
    if (!s.param->value.allFinite())
      throw std::runtime_error("AdamOptimizer: non-finite value in tensor '" +
                               s.param->name + "' after update");
    s.param->grad.setZero();
  }
}

std::uint64_t param_hash(const std::vector<const ParamTensor*>& params) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](const unsigned char* bytes, size_t n) {
    for (size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 0x100000001b3ULL;
    }
  };
  for (const ParamTensor* p : params) {
    for (int j = 0; j < p->value.cols(); ++j)
      for (int i = 0; i < p->value.rows(); ++i) {
        const double v = p->value(i, j);
        mix(reinterpret_cast<const unsigned char*>(&v), sizeof(v));
      }
  }
  return h;
}

}  // namespace bee

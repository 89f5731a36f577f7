#pragma once

#include <cstdint>
#include <vector>

#include "bee/core/tensor.hpp"

namespace bee {

/// Bias-corrected Adam over a fixed set of attached tensors. step() consumes
/// and zeroes the accumulated gradients. A non-finite gradient aborts with
/// the offending tensor named in the exception.
class AdamOptimizer {
 public:
  explicit AdamOptimizer(double lr = 1e-3, double beta1 = 0.9,
                         double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void attach(ParamTensor* p);
  void attach(const std::vector<ParamTensor*>& ps);

  void step();

  std::int64_t step_count() const { return step_count_; }
  double learning_rate() const { return lr_; }

 private:
  struct Slot {
    ParamTensor* param;
    MatrixXd m;  // first moment
    MatrixXd v;  // second moment
  };

  double lr_, beta1_, beta2_, eps_;
  std::int64_t step_count_ = 0;
  std::vector<Slot> slots_;
};

}  // namespace bee

#pragma once

#include <functional>
#include <string>
#include <vector>

#include "bee/core/tensor.hpp"

namespace bee {

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::string worst_tensor;
  int worst_row = -1, worst_col = -1;
};

/// Central-difference check of the gradients currently stored in `params`
/// against `loss`, a pure re-evaluation of the same objective. Every
/// coordinate of every tensor is perturbed at +/- h.
///
/// Relative error per coordinate: |g_a - g_fd| / max(|g_a|, |g_fd|, floor).
GradCheckReport gradcheck(const std::vector<ParamTensor*>& params,
                          const std::function<double()>& loss, double h = 1e-5,
                          double floor = 1e-6);

}  // namespace bee

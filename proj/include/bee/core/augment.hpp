#pragma once

#include "bee/core/tensor.hpp"

namespace bee {

struct MixupResult {
  VectorXd x;
  double y;
  double lambda;
};

/// Convex combination of two (input, label) pairs with lambda ~ Beta(a, a).
/// alpha == 0 disables mixing (lambda = 1, returns the first pair).
MixupResult mixup_pair(const VectorXd& x1, double y1, const VectorXd& x2,
                       double y2, double alpha, Rng& rng);

/// Deterministic variant with the mixing weight supplied by the caller.
MixupResult mixup_with_lambda(const VectorXd& x1, double y1, const VectorXd& x2,
                              double y2, double lambda);

/// Zero-pads an h x w image (flattened row-major) by `pad` on each side and
/// takes a random h x w crop of the padded image.
VectorXd random_crop(const VectorXd& image, int h, int w, int pad, Rng& rng);

/// Crop with explicit offsets in [0, 2*pad]; the random variant draws them.
VectorXd crop_at(const VectorXd& image, int h, int w, int pad, int dy, int dx);

/// Reparameterized draw from N(mean, diag(exp(logvar))):
///   sample = mean + exp(0.5 * clamp(logvar)) .* eps,  eps ~ N(0, I).
/// logvar is clamped to [-20, 5] before use.
VectorXd gaussian_sample(const VectorXd& mean, const VectorXd& logvar, Rng& rng);

/// The eps-explicit version used by training code that pre-draws noise.
VectorXd gaussian_sample_with_eps(const VectorXd& mean, const VectorXd& logvar,
                                  const VectorXd& eps);

double clamp_logvar(double lv);

}  // namespace bee

#include "bee/core/augment.hpp"

#include <cmath>
#include <stdexcept>

namespace bee {

MixupResult mixup_with_lambda(const VectorXd& x1, double y1, const VectorXd& x2,
                              double y2, double lambda) {
  if (x1.size() != x2.size())
    throw std::invalid_argument("mixup: input shape mismatch");
  MixupResult r;
  r.lambda = lambda;
  r.x = lambda * x1 + (1.0 - lambda) * x2;
  r.y = lambda * y1 + (1.0 - lambda) * y2;
  return r;
}

MixupResult mixup_pair(const VectorXd& x1, double y1, const VectorXd& x2,
                       double y2, double alpha, Rng& rng) {
  if (alpha < 0.0) throw std::invalid_argument("mixup: alpha must be >= 0");
  const double lambda = alpha == 0.0 ? 1.0 : rng.beta(alpha);
  return mixup_with_lambda(x1, y1, x2, y2, lambda);
}

VectorXd crop_at(const VectorXd& image, int h, int w, int pad, int dy, int dx) {
  if (image.size() != static_cast<long>(h) * w)
    throw std::invalid_argument("crop: image size mismatch");
  if (dy < 0 || dy > 2 * pad || dx < 0 || dx > 2 * pad)
    throw std::invalid_argument("crop: offset out of range");
  VectorXd out = VectorXd::Zero(image.size());
  // Output pixel (y, x) reads padded(y + dy, x + dx); padded(py, px) is
  // image(py - pad, px - pad) inside bounds, zero outside.
  for (int y = 0; y < h; ++y) {
    const int sy = y + dy - pad;
    if (sy < 0 || sy >= h) continue;
    for (int x = 0; x < w; ++x) {
      const int sx = x + dx - pad;
      if (sx < 0 || sx >= w) continue;
      out(y * w + x) = image(sy * w + sx);
    }
  }
  return out;
}

VectorXd random_crop(const VectorXd& image, int h, int w, int pad, Rng& rng) {
  const int dy = rng.uniform_int(2 * pad + 1);
  const int dx = rng.uniform_int(2 * pad + 1);
  return crop_at(image, h, w, pad, dy, dx);
}

double clamp_logvar(double lv) {
  if (lv < -20.0) return -20.0;
  if (lv > 5.0) return 5.0;
  return lv;
}

VectorXd gaussian_sample_with_eps(const VectorXd& mean, const VectorXd& logvar,
                                  const VectorXd& eps) {
  if (mean.size() != logvar.size() || mean.size() != eps.size())
    throw std::invalid_argument("gaussian_sample: dimension mismatch");
  VectorXd out(mean.size());
  for (int i = 0; i < mean.size(); ++i)
    out(i) = mean(i) + std::exp(0.5 * clamp_logvar(logvar(i))) * eps(i);
  return out;
}

VectorXd gaussian_sample(const VectorXd& mean, const VectorXd& logvar, Rng& rng) {
  VectorXd eps(mean.size());
  for (int i = 0; i < eps.size(); ++i) eps(i) = rng.normal();
  return gaussian_sample_with_eps(mean, logvar, eps);
}

}  // namespace bee

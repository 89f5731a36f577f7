#include "bee/core/dense_net.hpp"

#include <cmath>
#include <stdexcept>

namespace bee {

double apply_activation(Activation act, double x) {
  switch (act) {
    case Activation::relu: return x > 0.0 ? x : 0.0;
    case Activation::sigmoid: return 1.0 / (1.0 + std::exp(-x));
    case Activation::identity: return x;
  }
  return x;
}

namespace {

VectorXd activate(Activation act, const VectorXd& a) {
  switch (act) {
    case Activation::relu: return a.cwiseMax(0.0);
    case Activation::sigmoid:
      return a.unaryExpr([](double x) { return 1.0 / (1.0 + std::exp(-x)); });
    case Activation::identity: return a;
  }
  return a;
}

// d(out)/d(preact) given preact, elementwise.
VectorXd activation_grad(Activation act, const VectorXd& preact) {
  switch (act) {
    case Activation::relu:
      return preact.unaryExpr([](double x) { return x > 0.0 ? 1.0 : 0.0; });
    case Activation::sigmoid:
      return preact.unaryExpr([](double x) {
        const double s = 1.0 / (1.0 + std::exp(-x));
        return s * (1.0 - s);
      });
    case Activation::identity:
      return VectorXd::Ones(preact.size());
  }
  return VectorXd::Ones(preact.size());
}

}  // namespace

void DenseGrads::add_scaled(const DenseGrads& other, double scale) {
  for (size_t i = 0; i < w.size(); ++i) {
    w[i] += scale * other.w[i];
    b[i] += scale * other.b[i];
  }
}

void DenseGrads::set_zero() {
  for (auto& m : w) m.setZero();
  for (auto& v : b) v.setZero();
}

DenseNet::DenseNet(const std::vector<int>& dims,
                   const std::vector<Activation>& acts, Rng& rng,
                   const std::string& name_prefix) {
  if (dims.size() < 2 || acts.size() != dims.size() - 1)
    throw std::invalid_argument("DenseNet: dims/acts sizes do not chain");
  for (size_t i = 0; i + 1 < dims.size(); ++i) {
    const int in = dims[i];
    const int out = dims[i + 1];
    // He-style init for relu layers, Xavier-style otherwise.
    const double stddev = acts[i] == Activation::relu
                              ? std::sqrt(2.0 / in)
                              : std::sqrt(1.0 / in);
    Layer layer{ParamTensor::randn(name_prefix + ".w" + std::to_string(i), out,
                                   in, stddev, rng),
                ParamTensor::zeros(name_prefix + ".b" + std::to_string(i), out, 1),
                acts[i]};
    layers_.push_back(std::move(layer));
  }
}

int DenseNet::input_dim() const {
  return layers_.empty() ? 0 : static_cast<int>(layers_.front().w.value.cols());
}

int DenseNet::output_dim() const {
  return layers_.empty() ? 0 : static_cast<int>(layers_.back().w.value.rows());
}

VectorXd DenseNet::forward(const VectorXd& x, DenseCache& cache) const {
  if (x.size() != input_dim())
    throw std::invalid_argument("DenseNet::forward: input dimension mismatch");
  cache.inputs.assign(layers_.size(), VectorXd());
  cache.preact.assign(layers_.size(), VectorXd());
  VectorXd h = x;
  for (size_t i = 0; i < layers_.size(); ++i) {
    cache.inputs[i] = h;
    VectorXd a = layers_[i].w.value * h + layers_[i].b.value.col(0);
    cache.preact[i] = a;
    h = activate(layers_[i].act, a);
  }
  cache.valid = true;
  return h;
}

VectorXd DenseNet::forward_pure(const VectorXd& x) const {
  if (x.size() != input_dim())
    throw std::invalid_argument("DenseNet::forward_pure: input dimension mismatch");
  VectorXd h = x;
  for (const auto& layer : layers_)
    h = activate(layer.act, layer.w.value * h + layer.b.value.col(0));
  return h;
}

MatrixXd DenseNet::forward_batch(const MatrixXd& x) const {
  if (x.cols() != input_dim())
    throw std::invalid_argument("DenseNet::forward_batch: input dimension mismatch");
  MatrixXd h = x;
  for (const auto& layer : layers_) {
    MatrixXd a = h * layer.w.value.transpose();
    a.rowwise() += layer.b.value.col(0).transpose();
    switch (layer.act) {
      case Activation::relu: h = a.cwiseMax(0.0); break;
      case Activation::sigmoid:
        h = a.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
        break;
      case Activation::identity: h = std::move(a); break;
    }
  }
  return h;
}

VectorXd DenseNet::backward(const DenseCache& cache, const VectorXd& grad_out,
                            DenseGrads& grads) const {
  if (!cache.valid)
    throw std::logic_error("DenseNet::backward called without a forward cache");
  if (grad_out.size() != output_dim())
    throw std::invalid_argument("DenseNet::backward: gradient dimension mismatch");
  VectorXd g = grad_out;
  for (int i = static_cast<int>(layers_.size()) - 1; i >= 0; --i) {
    const VectorXd d_pre =
        g.cwiseProduct(activation_grad(layers_[i].act, cache.preact[i]));
    grads.w[i].noalias() += d_pre * cache.inputs[i].transpose();
    grads.b[i] += d_pre;
    g = layers_[i].w.value.transpose() * d_pre;
  }
  return g;
}

VectorXd DenseNet::forward(const VectorXd& x) { return forward(x, own_cache_); }

VectorXd DenseNet::backward(const VectorXd& grad_out) {
  DenseGrads grads = make_grads();
  VectorXd gin = backward(own_cache_, grad_out, grads);
  accumulate(grads);
  return gin;
}

DenseGrads DenseNet::make_grads() const {
  DenseGrads g;
  for (const auto& layer : layers_) {
    g.w.emplace_back(MatrixXd::Zero(layer.w.value.rows(), layer.w.value.cols()));
    g.b.emplace_back(VectorXd::Zero(layer.b.value.rows()));
  }
  return g;
}

void DenseNet::accumulate(const DenseGrads& grads, double scale) {
  for (size_t i = 0; i < layers_.size(); ++i) {
    layers_[i].w.grad += scale * grads.w[i];
    layers_[i].b.grad.col(0) += scale * grads.b[i];
  }
}

std::vector<ParamTensor*> DenseNet::parameters() {
  std::vector<ParamTensor*> out;
  for (auto& layer : layers_) {
    out.push_back(&layer.w);
    out.push_back(&layer.b);
  }
  return out;
}

std::vector<const ParamTensor*> DenseNet::parameters() const {
  std::vector<const ParamTensor*> out;
  for (const auto& layer : layers_) {
    out.push_back(&layer.w);
    out.push_back(&layer.b);
  }
  return out;
}

}  // namespace bee

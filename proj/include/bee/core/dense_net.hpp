#pragma once

#include <span>
#include <string>
#include <vector>

#include "bee/core/tensor.hpp"

namespace bee {

enum class Activation { relu, sigmoid, identity };

double apply_activation(Activation act, double x);

/// Per-call state captured by a forward pass so the matching backward pass
/// can run later. Callers that train in parallel keep one cache per sample.
struct DenseCache {
  std::vector<VectorXd> inputs;   // input to each layer
  std::vector<VectorXd> preact;   // pre-activation of each layer
  bool valid = false;
};

/// Gradient sink for one network; same layout as the layer list.
struct DenseGrads {
  std::vector<MatrixXd> w;
  std::vector<VectorXd> b;

  void add_scaled(const DenseGrads& other, double scale);
  void set_zero();
};

/// Plain fully connected stack. Layer i maps dims[i] -> dims[i+1] and
/// applies acts[i]. Backward is hand-written per layer; there is no tape.
class DenseNet {
 public:
  struct Layer {
    ParamTensor w;  // out x in
    ParamTensor b;  // out x 1
    Activation act;
  };

  DenseNet() = default;
  DenseNet(const std::vector<int>& dims, const std::vector<Activation>& acts,
           Rng& rng, const std::string& name_prefix = "dense");

  int input_dim() const;
  int output_dim() const;
  int num_layers() const { return static_cast<int>(layers_.size()); }

  const std::vector<Layer>& layers() const { return layers_; }
  std::vector<Layer>& layers() { return layers_; }

  /// Pure forward; caller owns the cache.
  VectorXd forward(const VectorXd& x, DenseCache& cache) const;

  /// Pure forward without a cache (for frozen-parameter evaluation).
  VectorXd forward_pure(const VectorXd& x) const;

  /// Row-batched pure forward: each row of X is one input.
  MatrixXd forward_batch(const MatrixXd& x) const;

  /// Backward for a cached forward. Accumulates parameter gradients into
  /// `grads` and returns the gradient w.r.t. the input.
  VectorXd backward(const DenseCache& cache, const VectorXd& grad_out,
                    DenseGrads& grads) const;

  /// Convenience single-threaded path: forward with an internal cache,
  /// backward accumulating straight into the ParamTensor gradients.
  VectorXd forward(const VectorXd& x);
  VectorXd backward(const VectorXd& grad_out);

  DenseGrads make_grads() const;
  void accumulate(const DenseGrads& grads, double scale = 1.0);

  std::vector<ParamTensor*> parameters();
  std::vector<const ParamTensor*> parameters() const;

 private:
  std::vector<Layer> layers_;
  DenseCache own_cache_;
};

}  // namespace bee

#pragma once

#include "bee/core/tensor.hpp"

namespace bee {

/// Gated recurrent cell with a linear candidate:
///
///   r  = sigmoid(Wr x + Ur h + br)
///   u  = sigmoid(Wu x + Uu h + bu)
///   c  = Wc x + Uc (r .* h) + bc
///   h' = (1 - u) .* h + u .* c
///
/// The gates carry the nonlinearity; the linear candidate keeps the cell
/// able to represent exact affine transition maps, which the dynamics
/// fixtures rely on.
class GatedCell {
 public:
  struct Cache {
    VectorXd x, h, r, u, c, rh;
    bool valid = false;
  };

  struct Grads {
    MatrixXd wr, ur, wu, uu, wc, uc;
    VectorXd br, bu, bc;
    void add_scaled(const Grads& other, double scale);
    void set_zero();
  };

  GatedCell() = default;
  GatedCell(int input_dim, int hidden_dim, Rng& rng,
            const std::string& name_prefix = "cell");

  int input_dim() const { return input_dim_; }
  int hidden_dim() const { return hidden_dim_; }

  VectorXd forward(const VectorXd& x, const VectorXd& h, Cache& cache) const;

  /// Row-batched forward: row i of X/H is one (input, hidden) pair.
  MatrixXd forward_batch(const MatrixXd& x, const MatrixXd& h) const;

  /// Backward for one cached step. Accumulates parameter gradients and adds
  /// the input/hidden gradients into dx/dh.
  void backward(const Cache& cache, const VectorXd& grad_h_next, Grads& grads,
                VectorXd& dx, VectorXd& dh) const;

  Grads make_grads() const;
  void accumulate(const Grads& grads, double scale = 1.0);

  std::vector<ParamTensor*> parameters();
  std::vector<const ParamTensor*> parameters() const;

  ParamTensor& param(const std::string& short_name);

 private:
  int input_dim_ = 0;
  int hidden_dim_ = 0;
  ParamTensor wr_, ur_, br_;
  ParamTensor wu_, uu_, bu_;
  ParamTensor wc_, uc_, bc_;
};

}  // namespace bee

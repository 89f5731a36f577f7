#include "bee/core/recurrent.hpp"

#include <cmath>
#include <stdexcept>

namespace bee {

namespace {

VectorXd sigmoid_v(VectorXd a) {
  for (int i = 0; i < a.size(); ++i) a(i) = 1.0 / (1.0 + std::exp(-a(i)));
  return a;
}

MatrixXd sigmoid_m(MatrixXd a) {
  for (int j = 0; j < a.cols(); ++j)
    for (int i = 0; i < a.rows(); ++i) a(i, j) = 1.0 / (1.0 + std::exp(-a(i, j)));
  return a;
}

}  // namespace

void GatedCell::Grads::add_scaled(const Grads& other, double scale) {
  wr += scale * other.wr;
  ur += scale * other.ur;
  br += scale * other.br;
  wu += scale * other.wu;
  uu += scale * other.uu;
  bu += scale * other.bu;
  wc += scale * other.wc;
  uc += scale * other.uc;
  bc += scale * other.bc;
}

void GatedCell::Grads::set_zero() {
  wr.setZero();
  ur.setZero();
  br.setZero();
  wu.setZero();
  uu.setZero();
  bu.setZero();
  wc.setZero();
  uc.setZero();
  bc.setZero();
}

GatedCell::GatedCell(int input_dim, int hidden_dim, Rng& rng,
                     const std::string& name_prefix)
    : input_dim_(input_dim), hidden_dim_(hidden_dim) {
  const double sx = std::sqrt(1.0 / input_dim);
  const double sh = std::sqrt(1.0 / hidden_dim);
  auto mk = [&](const char* n, int rows, int cols, double s) {
    return ParamTensor::randn(name_prefix + "." + n, rows, cols, s, rng);
  };
  wr_ = mk("wr", hidden_dim, input_dim, sx);
  ur_ = mk("ur", hidden_dim, hidden_dim, sh);
  br_ = ParamTensor::zeros(name_prefix + ".br", hidden_dim, 1);
  wu_ = mk("wu", hidden_dim, input_dim, sx);
  uu_ = mk("uu", hidden_dim, hidden_dim, sh);
  bu_ = ParamTensor::zeros(name_prefix + ".bu", hidden_dim, 1);
  wc_ = mk("wc", hidden_dim, input_dim, sx);
  uc_ = mk("uc", hidden_dim, hidden_dim, sh);
  bc_ = ParamTensor::zeros(name_prefix + ".bc", hidden_dim, 1);
}

VectorXd GatedCell::forward(const VectorXd& x, const VectorXd& h,
                            Cache& cache) const {
  if (x.size() != input_dim_ || h.size() != hidden_dim_)
    throw std::invalid_argument("GatedCell::forward: dimension mismatch");
  cache.x = x;
  cache.h = h;
  cache.r = sigmoid_v(wr_.value * x + ur_.value * h + br_.value.col(0));
  cache.u = sigmoid_v(wu_.value * x + uu_.value * h + bu_.value.col(0));
  cache.rh = cache.r.cwiseProduct(h);
  cache.c = wc_.value * x + uc_.value * cache.rh + bc_.value.col(0);
  cache.valid = true;
  return (VectorXd::Ones(hidden_dim_) - cache.u).cwiseProduct(h) +
         cache.u.cwiseProduct(cache.c);
}

MatrixXd GatedCell::forward_batch(const MatrixXd& x, const MatrixXd& h) const {
  if (x.cols() != input_dim_ || h.cols() != hidden_dim_ || x.rows() != h.rows())
    throw std::invalid_argument("GatedCell::forward_batch: dimension mismatch");
  MatrixXd r = x * wr_.value.transpose() + h * ur_.value.transpose();
  r.rowwise() += br_.value.col(0).transpose();
  r = sigmoid_m(r);
  MatrixXd u = x * wu_.value.transpose() + h * uu_.value.transpose();
  u.rowwise() += bu_.value.col(0).transpose();
  u = sigmoid_m(u);
  const MatrixXd rh = r.cwiseProduct(h);
  MatrixXd c = x * wc_.value.transpose() + rh * uc_.value.transpose();
  c.rowwise() += bc_.value.col(0).transpose();
  return (1.0 - u.array()).matrix().cwiseProduct(h) + u.cwiseProduct(c);
}

void GatedCell::backward(const Cache& cache, const VectorXd& grad_h_next,
                         Grads& grads, VectorXd& dx, VectorXd& dh) const {
  if (!cache.valid)
    throw std::logic_error("GatedCell::backward called without a forward cache");
  const VectorXd& g = grad_h_next;
  const VectorXd dc = g.cwiseProduct(cache.u);
  const VectorXd du = g.cwiseProduct(cache.c - cache.h);
  VectorXd dh_local = g.cwiseProduct(VectorXd::Ones(hidden_dim_) - cache.u);

  // candidate (linear)
  grads.wc.noalias() += dc * cache.x.transpose();
  grads.uc.noalias() += dc * cache.rh.transpose();
  grads.bc += dc;
  const VectorXd drh = uc_.value.transpose() * dc;
  const VectorXd dr = drh.cwiseProduct(cache.h);
  dh_local += drh.cwiseProduct(cache.r);
  VectorXd dx_local = wc_.value.transpose() * dc;

  // update gate
  const VectorXd dau =
      du.cwiseProduct(cache.u).cwiseProduct(VectorXd::Ones(hidden_dim_) - cache.u);
  grads.wu.noalias() += dau * cache.x.transpose();
  grads.uu.noalias() += dau * cache.h.transpose();
  grads.bu += dau;
  dx_local += wu_.value.transpose() * dau;
  dh_local += uu_.value.transpose() * dau;

  // reset gate
  const VectorXd dar =
      dr.cwiseProduct(cache.r).cwiseProduct(VectorXd::Ones(hidden_dim_) - cache.r);
  grads.wr.noalias() += dar * cache.x.transpose();
  grads.ur.noalias() += dar * cache.h.transpose();
  grads.br += dar;
  dx_local += wr_.value.transpose() * dar;
  dh_local += ur_.value.transpose() * dar;

  dx += dx_local;
  dh += dh_local;
}

GatedCell::Grads GatedCell::make_grads() const {
  Grads g;
  g.wr = MatrixXd::Zero(hidden_dim_, input_dim_);
  g.ur = MatrixXd::Zero(hidden_dim_, hidden_dim_);
  g.br = VectorXd::Zero(hidden_dim_);
  g.wu = MatrixXd::Zero(hidden_dim_, input_dim_);
  g.uu = MatrixXd::Zero(hidden_dim_, hidden_dim_);
  g.bu = VectorXd::Zero(hidden_dim_);
  g.wc = MatrixXd::Zero(hidden_dim_, input_dim_);
  g.uc = MatrixXd::Zero(hidden_dim_, hidden_dim_);
  g.bc = VectorXd::Zero(hidden_dim_);
  return g;
}

void GatedCell::accumulate(const Grads& grads, double scale) {
  wr_.grad += scale * grads.wr;
  ur_.grad += scale * grads.ur;
  br_.grad.col(0) += scale * grads.br;
  wu_.grad += scale * grads.wu;
  uu_.grad += scale * grads.uu;
  bu_.grad.col(0) += scale * grads.bu;
  wc_.grad += scale * grads.wc;
  uc_.grad += scale * grads.uc;
  bc_.grad.col(0) += scale * grads.bc;
}

std::vector<ParamTensor*> GatedCell::parameters() {
  return {&wr_, &ur_, &br_, &wu_, &uu_, &bu_, &wc_, &uc_, &bc_};
}

std::vector<const ParamTensor*> GatedCell::parameters() const {
  return {&wr_, &ur_, &br_, &wu_, &uu_, &bu_, &wc_, &uc_, &bc_};
}

ParamTensor& GatedCell::param(const std::string& short_name) {
  for (ParamTensor* p : parameters()) {
    const auto pos = p->name.rfind('.');
    if (p->name.substr(pos + 1) == short_name) return *p;
  }
  throw std::invalid_argument("GatedCell::param: unknown name " + short_name);
}

}  // namespace bee

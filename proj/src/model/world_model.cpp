#include "bee/model/world_model.hpp"

#include <cmath>
#include <stdexcept>

#include "bee/core/augment.hpp"
#include "bee/core/checkpoint.hpp"

namespace bee {

namespace {

VectorXd concat_input(const VectorXd& z, const Action& a) {
  VectorXd x(z.size() + 2);
  x.head(z.size()) = z;
  x(z.size()) = a.dx;
  x(z.size() + 1) = a.dy;
  return x;
}

std::vector<Activation> hidden_then(Activation last, size_t n_layers) {
  std::vector<Activation> acts(n_layers, Activation::relu);
  acts.back() = last;
  return acts;
}

std::vector<int> chain_dims(int in, const std::vector<int>& hidden, int out) {
  std::vector<int> dims{in};
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(out);
  return dims;
}

}  // namespace

LatentDynamics::LatentDynamics(int latent_dim, int action_dim,
                               const std::vector<int>& head_hidden, Rng& rng,
                               const std::string& name_prefix)
    : latent_dim_(latent_dim), action_dim_(action_dim) {
  cell_ = GatedCell(latent_dim + action_dim, latent_dim, rng, name_prefix + ".cell");
  const auto dims = chain_dims(latent_dim, head_hidden, latent_dim);
  head_ = DenseNet(dims, hidden_then(Activation::identity, dims.size() - 1), rng,
                   name_prefix + ".head");
}

VectorXd LatentDynamics::step(const VectorXd& z, const Action& a) const {
  GatedCell::Cache cache;
  return head_.forward_pure(cell_.forward(concat_input(z, a), z, cache));
}

MatrixXd LatentDynamics::step_batch(const MatrixXd& z, const MatrixXd& a) const {
  MatrixXd x(z.rows(), z.cols() + a.cols());
  x.leftCols(z.cols()) = z;
  x.rightCols(a.cols()) = a;
  return head_.forward_batch(cell_.forward_batch(x, z));
}

std::vector<VectorXd> LatentDynamics::rollout(const VectorXd& z0,
                                              std::span<const Action> actions) const {
  std::vector<VectorXd> out;
  out.reserve(actions.size());
  VectorXd z = z0;
  for (const Action& a : actions) {
    z = step(z, a);
    out.push_back(z);
  }
  return out;
}

double LatentDynamics::sequence_loss_and_grads(const std::vector<VectorXd>& latents,
                                               std::span<const Action> actions,
                                               GatedCell::Grads& cell_grads,
                                               DenseGrads& head_grads) const {
  const int steps = static_cast<int>(actions.size());
  if (static_cast<int>(latents.size()) != steps + 1)
    throw std::invalid_argument("sequence_loss: need one more latent than action");
  if (steps < 1) throw std::invalid_argument("sequence_loss: segment too short");

  std::vector<GatedCell::Cache> cell_caches(steps);
  std::vector<DenseCache> head_caches(steps);
  std::vector<VectorXd> predicted(steps + 1);
  predicted[0] = latents[0];
  double loss = 0.0;
  for (int k = 0; k < steps; ++k) {
    const VectorXd x = concat_input(predicted[k], actions[k]);
    const VectorXd h = cell_.forward(x, predicted[k], cell_caches[k]);
    predicted[k + 1] = head_.forward(h, head_caches[k]);
    loss += (latents[k + 1] - predicted[k + 1]).squaredNorm();
  }
  loss /= steps;

  // Backprop through the whole predicted chain; the gradient reaching the
  // encoded start latent is dropped (targets and inputs are stop-grad).
  VectorXd carry = VectorXd::Zero(latent_dim_);
  for (int k = steps - 1; k >= 0; --k) {
    const VectorXd g_z =
        carry + (2.0 / steps) * (predicted[k + 1] - latents[k + 1]);
    const VectorXd g_h = head_.backward(head_caches[k], g_z, head_grads);
    VectorXd dx = VectorXd::Zero(latent_dim_ + action_dim_);
    VectorXd dh = VectorXd::Zero(latent_dim_);
    cell_.backward(cell_caches[k], g_h, cell_grads, dx, dh);
    carry = dx.head(latent_dim_) + dh;
  }
  return loss;
}

std::vector<ParamTensor*> LatentDynamics::parameters() {
  auto out = cell_.parameters();
  for (ParamTensor* p : head_.parameters()) out.push_back(p);
  return out;
}

std::vector<const ParamTensor*> LatentDynamics::parameters() const {
  auto out = cell_.parameters();
  std::vector<const ParamTensor*> res(out.begin(), out.end());
  for (const ParamTensor* p : head_.parameters()) res.push_back(p);
  return res;
}

WorldModel::WorldModel(const WorldModelConfig& config, Rng& init_rng)
    : config_(config),
      vae_opt_(config.lr),
      dyn_opt_(config.lr) {
  const int d = config_.image_dim();
  const int lz = config_.latent_dim;
  const auto enc_dims = chain_dims(d, config_.enc_hidden, 2 * lz);
  encoder_ = DenseNet(enc_dims, hidden_then(Activation::identity, enc_dims.size() - 1),
                      init_rng, "enc");
  const auto dec_dims = chain_dims(lz, config_.dec_hidden, d);
  decoder_ = DenseNet(dec_dims, hidden_then(Activation::sigmoid, dec_dims.size() - 1),
                      init_rng, "dec");
  dynamics_ = LatentDynamics(lz, config_.action_dim, config_.dyn_head_hidden,
                             init_rng, "dyn");
  vae_opt_.attach(encoder_.parameters());
  vae_opt_.attach(decoder_.parameters());
  dyn_opt_.attach(dynamics_.parameters());
}

WorldModel::Encoding WorldModel::encode(const VectorXd& image, Rng& rng) const {
  Encoding e;
  const VectorXd out = encoder_.forward_pure(image);
  const int lz = config_.latent_dim;
  e.mean = out.head(lz);
  e.logvar = out.tail(lz);
  e.sample = gaussian_sample(e.mean, e.logvar, rng);
  return e;
}

VectorXd WorldModel::encode_mean(const VectorXd& image) const {
  return encoder_.forward_pure(image).head(config_.latent_dim);
}

MatrixXd WorldModel::encode_mean_batch(const MatrixXd& images) const {
  return encoder_.forward_batch(images).leftCols(config_.latent_dim);
}

VectorXd WorldModel::decode(const VectorXd& z) const {
  return decoder_.forward_pure(z);
}

MatrixXd WorldModel::decode_batch(const MatrixXd& z) const {
  return decoder_.forward_batch(z);
}

VectorXd WorldModel::dynamics_step(const VectorXd& z, const Action& a) const {
  return dynamics_.step(z, a);
}

std::vector<VectorXd> WorldModel::rollout(const VectorXd& z0,
                                          std::span<const Action> actions) const {
  return dynamics_.rollout(z0, actions);
}

VaeSampleResult vae_sample_loss_grads(const DenseNet& enc, const DenseNet& dec,
                                      const VectorXd& x, const VectorXd& eps,
                                      double beta, DenseGrads& enc_grads,
                                      DenseGrads& dec_grads) {
  const int lz = dec.input_dim();
  DenseCache enc_cache, dec_cache;
  const VectorXd enc_out = enc.forward(x, enc_cache);
  const VectorXd mean = enc_out.head(lz);
  const VectorXd logvar_raw = enc_out.tail(lz);

  VectorXd logvar(lz), std_dev(lz);
  for (int i = 0; i < lz; ++i) {
    logvar(i) = clamp_logvar(logvar_raw(i));
    std_dev(i) = std::exp(0.5 * logvar(i));
  }
  const VectorXd z = mean + std_dev.cwiseProduct(eps);
  const VectorXd xhat = dec.forward(z, dec_cache);

  VaeSampleResult res;
  res.recon = (xhat - x).squaredNorm();
  double kl = 0.0;
  for (int i = 0; i < lz; ++i)
    kl += 0.5 * (std::exp(logvar(i)) + mean(i) * mean(i) - 1.0 - logvar(i));
  res.kl = kl;

  const VectorXd d_xhat = 2.0 * (xhat - x);
  const VectorXd dz = dec.backward(dec_cache, d_xhat, dec_grads);

  VectorXd upstream(2 * lz);
  for (int i = 0; i < lz; ++i) {
    upstream(i) = dz(i) + beta * mean(i);
    const bool clamped = logvar_raw(i) < -20.0 || logvar_raw(i) > 5.0;
    const double d_lv = dz(i) * eps(i) * 0.5 * std_dev(i) +
                        beta * 0.5 * (std::exp(logvar(i)) - 1.0);
    upstream(lz + i) = clamped ? 0.0 : d_lv;
  }
  enc.backward(enc_cache, upstream, enc_grads);
  return res;
}

double vae_elbo_mean(const DenseNet& enc, const DenseNet& dec, const VectorXd& x,
                     double beta) {
  const int lz = dec.input_dim();
  const VectorXd enc_out = enc.forward_pure(x);
  const VectorXd mean = enc_out.head(lz);
  double kl = 0.0;
  for (int i = 0; i < lz; ++i) {
    const double lv = clamp_logvar(enc_out(lz + i));
    kl += 0.5 * (std::exp(lv) + mean(i) * mean(i) - 1.0 - lv);
  }
  const double recon = (dec.forward_pure(mean) - x).squaredNorm();
  return -(recon + beta * kl);
}

struct WorldModel::SampleGrad {
  DenseGrads enc;
  DenseGrads dec;
  GatedCell::Grads cell;
  DenseGrads head;
  VaeSampleResult vae;
  double dyn_loss = 0.0;
};

VaeStats WorldModel::vae_loss_and_grads(const std::vector<VectorXd>& images,
                                        Rng& rng) {
  if (images.empty())
    throw std::invalid_argument("vae_loss: empty batch");
  const int n = static_cast<int>(images.size());
  const int lz = config_.latent_dim;

  std::vector<VectorXd> eps(n);
  for (int i = 0; i < n; ++i) {
    eps[i] = VectorXd(lz);
    for (int j = 0; j < lz; ++j) eps[i](j) = rng.normal();
  }

  std::vector<DenseGrads> enc_g(n), dec_g(n);
  std::vector<VaeSampleResult> results(n);
#pragma omp parallel for schedule(static) if (config_.parallel)
  for (int i = 0; i < n; ++i) {
    enc_g[i] = encoder_.make_grads();
    dec_g[i] = decoder_.make_grads();
    results[i] = vae_sample_loss_grads(encoder_, decoder_, images[i], eps[i],
                                       config_.beta, enc_g[i], dec_g[i]);
  }

  // serial in-order reduction keeps the result independent of threading
  const double scale = 1.0 / n;
  for (int i = 0; i < n; ++i) {
    encoder_.accumulate(enc_g[i], scale);
    decoder_.accumulate(dec_g[i], scale);
  }
  VaeStats stats;
  for (int i = 0; i < n; ++i) {
    stats.recon += results[i].recon * scale;
    stats.kl += results[i].kl * scale;
  }
  stats.loss = stats.recon + config_.beta * stats.kl;
  return stats;
}

VaeStats WorldModel::vae_update(const std::vector<VectorXd>& images, Rng& rng) {
  const VaeStats stats = vae_loss_and_grads(images, rng);
  if (!std::isfinite(stats.loss))
    throw std::runtime_error("world model: non-finite VAE loss (recon=" +
                             std::to_string(stats.recon) +
                             ", kl=" + std::to_string(stats.kl) + ")");
  vae_opt_.step();
  return stats;
}

double WorldModel::dynamics_loss_and_grads(
    const std::vector<std::vector<VectorXd>>& obs_segments,
    const std::vector<std::vector<Action>>& act_segments, Rng& rng) {
  if (obs_segments.empty() || obs_segments.size() != act_segments.size())
    throw std::invalid_argument("dynamics_loss: malformed batch");
  const int n = static_cast<int>(obs_segments.size());
  const int lz = config_.latent_dim;

  // Pre-draw all encoder noise so the draw sequence does not depend on the
  // thread schedule.
  std::vector<std::vector<VectorXd>> eps(n);
  for (int i = 0; i < n; ++i) {
    eps[i].resize(obs_segments[i].size());
    for (auto& e : eps[i]) {
      e = VectorXd(lz);
      for (int j = 0; j < lz; ++j) e(j) = rng.normal();
    }
  }

  std::vector<GatedCell::Grads> cell_g(n);
  std::vector<DenseGrads> head_g(n);
  std::vector<double> losses(n, 0.0);
#pragma omp parallel for schedule(static) if (config_.parallel)
  for (int i = 0; i < n; ++i) {
    cell_g[i] = dynamics_.cell().make_grads();
    head_g[i] = dynamics_.head().make_grads();
    std::vector<VectorXd> latents(obs_segments[i].size());
    for (size_t t = 0; t < obs_segments[i].size(); ++t) {
      const VectorXd out = encoder_.forward_pure(obs_segments[i][t]);
      latents[t] =
          gaussian_sample_with_eps(out.head(lz), out.tail(lz), eps[i][t]);
    }
    losses[i] = dynamics_.sequence_loss_and_grads(latents, act_segments[i],
                                                  cell_g[i], head_g[i]);
  }

  const double scale = 1.0 / n;
  double loss = 0.0;
  for (int i = 0; i < n; ++i) {
    dynamics_.cell().accumulate(cell_g[i], scale);
    dynamics_.head().accumulate(head_g[i], scale);
    loss += losses[i] * scale;
  }
  return loss;
}

double WorldModel::dynamics_update(
    const std::vector<std::vector<VectorXd>>& obs_segments,
    const std::vector<std::vector<Action>>& act_segments, Rng& rng) {
  const double loss = dynamics_loss_and_grads(obs_segments, act_segments, rng);
  if (!std::isfinite(loss))
    throw std::runtime_error("world model: non-finite dynamics loss");
  dyn_opt_.step();
  return loss;
}

TrainStepStats WorldModel::train_step(const ReplayBuffer& buffer,
                                      const std::vector<VectorXd>& example_images,
                                      int episodes_seen, Rng& rng) {
  if (buffer.empty()) throw std::invalid_argument("train_step: empty buffer");
  const int hw = config_.image_hw;
  const int pad = config_.crop_pad;
  TrainStepStats stats;

  std::vector<VectorXd> replay_batch;
  replay_batch.reserve(config_.batch_size);
  for (int i = 0; i < config_.batch_size; ++i) {
    const size_t ep = sample_recent_episode_index(buffer, config_.recent_window, rng);
    const auto& episode = buffer.episode(ep);
    const int t = rng.uniform_int(static_cast<int>(episode.obs.size()));
    replay_batch.push_back(random_crop(episode.obs[t].image, hw, hw, pad, rng));
  }
  stats.vae_replay = vae_update(replay_batch, rng);

  if (!example_images.empty()) {
    std::vector<VectorXd> example_batch;
    example_batch.reserve(config_.batch_size);
    for (int i = 0; i < config_.batch_size; ++i) {
      const int k = rng.uniform_int(static_cast<int>(example_images.size()));
      example_batch.push_back(random_crop(example_images[k], hw, hw, pad, rng));
    }
    stats.vae_examples = vae_update(example_batch, rng);
  }

  const int horizon = schedule_.horizon_for(episodes_seen);
  stats.horizon = horizon;
  std::vector<std::vector<VectorXd>> obs_segments(config_.batch_size);
  std::vector<std::vector<Action>> act_segments(config_.batch_size);
  for (int i = 0; i < config_.batch_size; ++i) {
    const size_t ep = sample_recent_episode_index(buffer, config_.recent_window, rng);
    const auto& episode = buffer.episode(ep);
    const int h = std::min(horizon, episode.num_transitions());
    if (h < 1) throw std::invalid_argument("train_step: episode has no transitions");
    const int t = rng.uniform_int(episode.num_transitions() - h + 1);
    for (int k = 0; k <= h; ++k) obs_segments[i].push_back(episode.obs[t + k].image);
    for (int k = 0; k < h; ++k) act_segments[i].push_back(episode.actions[t + k]);
  }
  stats.dyn_loss = dynamics_update(obs_segments, act_segments, rng);
  return stats;
}

std::vector<ParamTensor*> WorldModel::parameters() {
  std::vector<ParamTensor*> out = encoder_.parameters();
  for (auto* p : decoder_.parameters()) out.push_back(p);
  for (auto* p : dynamics_.parameters()) out.push_back(p);
  return out;
}

std::vector<const ParamTensor*> WorldModel::parameters() const {
  std::vector<const ParamTensor*> out = encoder_.parameters();
  for (auto* p : decoder_.parameters()) out.push_back(p);
  for (auto* p : dynamics_.parameters()) out.push_back(p);
  return out;
}

std::vector<const ParamTensor*> WorldModel::vae_parameters() const {
  std::vector<const ParamTensor*> out = encoder_.parameters();
  for (auto* p : decoder_.parameters()) out.push_back(p);
  return out;
}

void WorldModel::save(const std::string& path, std::uint64_t config_hash) const {
  save_checkpoint(path, parameters(), "config_hash", config_hash);
}

void WorldModel::load(const std::string& path) {
  load_checkpoint(path, parameters());
}

}  // namespace bee

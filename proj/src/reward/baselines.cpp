#include "bee/reward/baselines.hpp"

#include <cmath>
#include <stdexcept>

#include "bee/core/augment.hpp"

namespace bee {

DisagreementEnsemble::DisagreementEnsemble(const DisagreementConfig& config,
                                           int latent_dim, int action_dim,
                                           Rng& init_rng)
    : config_(config) {
  if (config.heads < 2)
    throw std::invalid_argument("DisagreementEnsemble: need at least two heads");
  // optimizers hold pointers into the heads; the vector must never relocate
  heads_.reserve(config.heads);
  opts_.reserve(config.heads);
  for (int i = 0; i < config.heads; ++i) {
    heads_.emplace_back(latent_dim, action_dim, config.head_hidden, init_rng,
                        "disagree" + std::to_string(i));
    opts_.emplace_back(config.lr);
    opts_.back().attach(heads_.back().parameters());
  }
}

void DisagreementEnsemble::update_once(const ReplayBuffer& buffer,
                                       const WorldModel& world_model,
                                       int horizon, Rng& rng) {
  const int lz = heads_[0].latent_dim();
  for (int hidx = 0; hidx < size(); ++hidx) {
    // each head draws its own batch
    std::vector<std::vector<VectorXd>> latent_segments(config_.batch_size);
    std::vector<std::vector<Action>> act_segments(config_.batch_size);
    for (int i = 0; i < config_.batch_size; ++i) {
      const size_t ep = sample_recent_episode_index(buffer, config_.recent_window, rng);
      const auto& episode = buffer.episode(ep);
      const int h = std::min(horizon, episode.num_transitions());
      if (h < 1) throw std::invalid_argument("disagreement: episode has no transitions");
      const int t = rng.uniform_int(episode.num_transitions() - h + 1);
      for (int k = 0; k <= h; ++k) {
        const auto enc = world_model.encode(episode.obs[t + k].image, rng);
        latent_segments[i].push_back(enc.sample);
      }
      for (int k = 0; k < h; ++k) act_segments[i].push_back(episode.actions[t + k]);
    }

    GatedCell::Grads cell_g = heads_[hidx].cell().make_grads();
    DenseGrads head_g = heads_[hidx].head().make_grads();
    double loss = 0.0;
    for (int i = 0; i < config_.batch_size; ++i) {
      GatedCell::Grads cg = heads_[hidx].cell().make_grads();
      DenseGrads hg = heads_[hidx].head().make_grads();
      loss += heads_[hidx].sequence_loss_and_grads(latent_segments[i],
                                                   act_segments[i], cg, hg);
      cell_g.add_scaled(cg, 1.0);
      head_g.add_scaled(hg, 1.0);
    }
    const double scale = 1.0 / config_.batch_size;
    if (!std::isfinite(loss))
      throw std::runtime_error("disagreement: non-finite dynamics loss");
    heads_[hidx].cell().accumulate(cell_g, scale);
    heads_[hidx].head().accumulate(head_g, scale);
    opts_[hidx].step();
    (void)lz;
  }
}

double DisagreementEnsemble::reward(const VectorXd& z0,
                                    std::span<const Action> actions) const {
  const int lz = static_cast<int>(z0.size());
  std::vector<VectorXd> z(size(), z0);
  double total = 0.0;
  for (const Action& a : actions) {
    for (int h = 0; h < size(); ++h) z[h] = heads_[h].step(z[h], a);
    // population variance across heads, averaged over dimensions; deviations
    // are taken against head 0 so exact agreement yields exactly zero
    VectorXd mean = VectorXd::Zero(lz);
    for (int h = 0; h < size(); ++h) mean += z[h] - z[0];
    mean /= size();
    double var = 0.0;
    for (int h = 0; h < size(); ++h) var += (z[h] - z[0] - mean).squaredNorm();
    var /= size();
    total += var / lz;
  }
  return total;
}

VectorXd DisagreementEnsemble::reward_batch(
    const MatrixXd& z0, const std::vector<MatrixXd>& step_actions) const {
  const int m = static_cast<int>(z0.rows());
  const int lz = static_cast<int>(z0.cols());
  std::vector<MatrixXd> z(size(), z0);
  VectorXd total = VectorXd::Zero(m);
  for (const MatrixXd& a : step_actions) {
    for (int h = 0; h < size(); ++h) z[h] = heads_[h].step_batch(z[h], a);
    MatrixXd mean = MatrixXd::Zero(m, lz);
    for (int h = 0; h < size(); ++h) mean += z[h] - z[0];
    mean /= size();
    VectorXd var = VectorXd::Zero(m);
    for (int h = 0; h < size(); ++h) {
      const MatrixXd dev = z[h] - z[0] - mean;
      var += dev.cwiseProduct(dev).rowwise().sum();
    }
    var /= size();
    total += var / lz;
  }
  return total;
}

std::vector<const ParamTensor*> DisagreementEnsemble::parameters() const {
  std::vector<const ParamTensor*> out;
  for (const auto& h : heads_)
    for (const ParamTensor* p : h.parameters()) out.push_back(p);
  return out;
}

LatentVae::LatentVae(const SmmConfig& config, int latent_dim, Rng& rng,
                     const std::string& name_prefix)
    : beta_(config.beta) {
  std::vector<int> enc_dims{latent_dim};
  enc_dims.insert(enc_dims.end(), config.hidden.begin(), config.hidden.end());
  enc_dims.push_back(2 * config.inner_dim);
  std::vector<Activation> enc_acts(enc_dims.size() - 1, Activation::relu);
  enc_acts.back() = Activation::identity;
  enc_ = DenseNet(enc_dims, enc_acts, rng, name_prefix + ".enc");

  std::vector<int> dec_dims{config.inner_dim};
  dec_dims.insert(dec_dims.end(), config.hidden.begin(), config.hidden.end());
  dec_dims.push_back(latent_dim);
  std::vector<Activation> dec_acts(dec_dims.size() - 1, Activation::relu);
  dec_acts.back() = Activation::identity;
  dec_ = DenseNet(dec_dims, dec_acts, rng, name_prefix + ".dec");

  opt_ = AdamOptimizer(config.lr);
  opt_.attach(enc_.parameters());
  opt_.attach(dec_.parameters());
}

double LatentVae::update(const std::vector<VectorXd>& batch, Rng& rng) {
  if (batch.empty()) throw std::invalid_argument("LatentVae::update: empty batch");
  const int inner = dec_.input_dim();
  DenseGrads enc_g = enc_.make_grads();
  DenseGrads dec_g = dec_.make_grads();
  double loss = 0.0;
  for (const VectorXd& x : batch) {
    VectorXd eps(inner);
    for (int j = 0; j < inner; ++j) eps(j) = rng.normal();
    const auto res =
        vae_sample_loss_grads(enc_, dec_, x, eps, beta_, enc_g, dec_g);
    loss += res.recon + beta_ * res.kl;
  }
  const double scale = 1.0 / batch.size();
  loss *= scale;
  if (!std::isfinite(loss))
    throw std::runtime_error("LatentVae: non-finite loss");
  enc_.accumulate(enc_g, scale);
  dec_.accumulate(dec_g, scale);
  opt_.step();
  return loss;
}

double LatentVae::elbo(const VectorXd& z) const {
  return vae_elbo_mean(enc_, dec_, z, beta_);
}

VectorXd LatentVae::elbo_batch(const MatrixXd& z) const {
  const int inner = dec_.input_dim();
  const MatrixXd enc_out = enc_.forward_batch(z);
  const MatrixXd mean = enc_out.leftCols(inner);
  VectorXd out(z.rows());
  const MatrixXd recon = dec_.forward_batch(mean);
  for (int i = 0; i < z.rows(); ++i) {
    double kl = 0.0;
    for (int j = 0; j < inner; ++j) {
      const double lv = clamp_logvar(enc_out(i, inner + j));
      const double mu = mean(i, j);
      kl += 0.5 * (std::exp(lv) + mu * mu - 1.0 - lv);
    }
    out(i) = -((recon.row(i) - z.row(i)).squaredNorm() + beta_ * kl);
  }
  return out;
}

std::vector<ParamTensor*> LatentVae::parameters() {
  auto out = enc_.parameters();
  for (auto* p : dec_.parameters()) out.push_back(p);
  return out;
}

std::vector<const ParamTensor*> LatentVae::parameters() const {
  std::vector<const ParamTensor*> out = enc_.parameters();
  for (const auto* p : dec_.parameters()) out.push_back(p);
  return out;
}

SmmDensityPair::SmmDensityPair(const SmmConfig& config, int latent_dim,
                               Rng& init_rng)
    : config_(config),
      p_star_(config, latent_dim, init_rng, "smm_star"),
      p_policy_(config, latent_dim, init_rng, "smm_policy") {}

void SmmDensityPair::update_once(const ReplayBuffer& buffer,
                                 const std::vector<VectorXd>& example_images,
                                 const WorldModel& world_model, Rng& rng) {
  if (example_images.empty())
    throw std::invalid_argument("smm: empty example set");
  std::vector<VectorXd> star_batch;
  for (int i = 0; i < config_.batch_size; ++i) {
    const int k = rng.uniform_int(static_cast<int>(example_images.size()));
    star_batch.push_back(world_model.encode_mean(example_images[k]));
  }
  p_star_.update(star_batch, rng);

  std::vector<VectorXd> policy_batch;
  for (int i = 0; i < config_.batch_size; ++i) {
    const size_t ep = sample_recent_episode_index(buffer, config_.recent_window, rng);
    const auto& episode = buffer.episode(ep);
    const int t = rng.uniform_int(static_cast<int>(episode.obs.size()));
    policy_batch.push_back(world_model.encode_mean(episode.obs[t].image));
  }
  p_policy_.update(policy_batch, rng);
}

double SmmDensityPair::reward(const VectorXd& z) const {
  return p_star_.elbo(z) - p_policy_.elbo(z);
}

VectorXd SmmDensityPair::reward_batch(const MatrixXd& z) const {
  return p_star_.elbo_batch(z) - p_policy_.elbo_batch(z);
}

Action random_policy(Rng& rng) {
  Action a;
  a.dx = rng.uniform(-1.0, 1.0);
  a.dy = rng.uniform(-1.0, 1.0);
  return a;
}

}  // namespace bee

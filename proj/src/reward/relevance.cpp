#include "bee/reward/relevance.hpp"

#include <cmath>
#include <stdexcept>

#include "bee/core/augment.hpp"
#include "bee/core/checkpoint.hpp"

namespace bee {

RewardMode reward_mode_from_string(const std::string& s) {
  if (s == "max") return RewardMode::max_score;
  if (s == "mean_plus_variance") return RewardMode::mean_plus_variance;
  if (s == "single") return RewardMode::single;
  throw std::invalid_argument("unknown reward mode: " + s);
}

std::string to_string(RewardMode mode) {
  switch (mode) {
    case RewardMode::max_score: return "max";
    case RewardMode::mean_plus_variance: return "mean_plus_variance";
    case RewardMode::single: return "single";
  }
  return "?";
}

SpectralNet::SpectralNet(const std::vector<int>& dims,
                         const std::vector<Activation>& acts, Rng& rng,
                         const std::string& name_prefix)
    : raw_(dims, acts, rng, name_prefix) {
  normalized_ = raw_;
  for (const auto& layer : raw_.layers())
    sn_.emplace_back(static_cast<int>(layer.w.value.rows()),
                     static_cast<int>(layer.w.value.cols()), rng);
  sigma_.assign(raw_.num_layers(), 1.0);
  // settle the singular-vector estimates on the initial weights
  refresh(10);
}

void SpectralNet::refresh(int power_iters) {
  for (int i = 0; i < raw_.num_layers(); ++i) {
    sigma_[i] = sn_[i].estimate(raw_.layers()[i].w.value, power_iters);
    normalized_.layers()[i].w.value = raw_.layers()[i].w.value / sigma_[i];
    normalized_.layers()[i].b.value = raw_.layers()[i].b.value;
  }
}

void SpectralNet::refresh_frozen() {
  for (int i = 0; i < raw_.num_layers(); ++i) {
    sigma_[i] = sn_[i].sigma_frozen(raw_.layers()[i].w.value);
    normalized_.layers()[i].w.value = raw_.layers()[i].w.value / sigma_[i];
    normalized_.layers()[i].b.value = raw_.layers()[i].b.value;
  }
}

double SpectralNet::score(const VectorXd& z) const {
  return normalized_.forward_pure(z)(0);
}

VectorXd SpectralNet::score_batch(const MatrixXd& z) const {
  return normalized_.forward_batch(z).col(0);
}

VectorXd SpectralNet::forward(const VectorXd& z, DenseCache& cache) const {
  return normalized_.forward(z, cache);
}

void SpectralNet::backward_to_raw(const DenseCache& cache,
                                  const VectorXd& grad_out) {
  DenseGrads grads = normalized_.make_grads();
  normalized_.backward(cache, grad_out, grads);
  for (int i = 0; i < raw_.num_layers(); ++i) {
    // W_bar = W / sigma, sigma = u^T W v  =>
    // dL/dW = G / sigma - (<G, W_bar> / sigma) u v^T
    const MatrixXd& g_bar = grads.w[i];
    const MatrixXd& w_bar = normalized_.layers()[i].w.value;
    const double inner = (g_bar.cwiseProduct(w_bar)).sum();
    raw_.layers()[i].w.grad +=
        g_bar / sigma_[i] -
        (inner / sigma_[i]) * (sn_[i].u() * sn_[i].v().transpose());
    raw_.layers()[i].b.grad.col(0) += grads.b[i];
  }
}

RelevanceEnsemble::RelevanceEnsemble(const EnsembleConfig& config,
                                     int latent_dim, Rng& init_rng)
    : config_(config), latent_dim_(latent_dim) {
  if (config.members < 1)
    throw std::invalid_argument("RelevanceEnsemble: need at least one member");
  std::vector<int> dims{latent_dim};
  dims.insert(dims.end(), config.hidden.begin(), config.hidden.end());
  dims.push_back(1);
  std::vector<Activation> acts(dims.size() - 1, Activation::relu);
  acts.back() = Activation::sigmoid;
  members_.reserve(config.members);
  opts_.reserve(config.members);
  for (int l = 0; l < config.members; ++l) {
    members_.emplace_back(dims, acts, init_rng, "disc" + std::to_string(l));
    opts_.emplace_back(config.lr);
    opts_.back().attach(members_.back().parameters());
    member_rngs_.push_back(init_rng.fork());
  }
}

std::vector<double> RelevanceEnsemble::train_members_on_latents(
    const std::vector<std::vector<VectorXd>>& positives_per_member,
    const std::vector<std::vector<VectorXd>>& negatives_per_member) {
  if (static_cast<int>(positives_per_member.size()) != size() ||
      static_cast<int>(negatives_per_member.size()) != size())
    throw std::invalid_argument("train_members_on_latents: need one batch per member");
  std::vector<double> losses(size(), 0.0);
  for (int l = 0; l < size(); ++l) {
    Rng& rng = member_rngs_[l];
    std::vector<VectorXd> xs;
    std::vector<double> ys;
    for (const auto& z : positives_per_member[l]) {
      xs.push_back(z);
      ys.push_back(1.0);
    }
    for (const auto& z : negatives_per_member[l]) {
      xs.push_back(z);
      ys.push_back(0.0);
    }
    const int n = static_cast<int>(xs.size());
    if (n == 0) throw std::invalid_argument("train_members_on_latents: empty batch");

    // mixup across the balanced batch
    std::vector<VectorXd> mixed_x(n);
    std::vector<double> mixed_y(n);
    for (int i = 0; i < n; ++i) {
      if (config_.mixup_alpha > 0.0) {
        const int j = rng.uniform_int(n);
        const auto mix = mixup_pair(xs[i], ys[i], xs[j], ys[j],
                                    config_.mixup_alpha, rng);
        mixed_x[i] = mix.x;
        mixed_y[i] = mix.y;
      } else {
        mixed_x[i] = xs[i];
        mixed_y[i] = ys[i];
      }
    }

    SpectralNet& member = members_[l];
    member.refresh(config_.power_iters);
    double loss = 0.0;
    for (int i = 0; i < n; ++i) {
      DenseCache cache;
      const double p = member.forward(mixed_x[i], cache)(0);
      const double pc = std::min(1.0 - 1e-12, std::max(1e-12, p));
      loss += -(mixed_y[i] * std::log(pc) + (1.0 - mixed_y[i]) * std::log(1.0 - pc));
      // d(BCE)/dp, scaled by 1/n for the batch mean
      const double dp = (-(mixed_y[i] / pc) + (1.0 - mixed_y[i]) / (1.0 - pc)) / n;
      member.backward_to_raw(cache, VectorXd::Constant(1, dp));
    }
    loss /= n;
    losses[l] = loss;
    opts_[l].step();
    member.refresh(config_.power_iters);
  }
  return losses;
}

void RelevanceEnsemble::train_members(const ReplayBuffer& buffer,
                                      const RelevantSet& relevant,
                                      const WorldModel& world_model,
                                      int image_hw) {
  if (buffer.empty()) throw std::invalid_argument("train_members: empty buffer");
  if (relevant.images.empty())
    throw std::invalid_argument("train_members: empty relevant set");
  std::vector<std::vector<VectorXd>> pos(size()), neg(size());
  for (int l = 0; l < size(); ++l) {
    Rng& rng = member_rngs_[l];
    for (int i = 0; i < config_.positives; ++i) {
      const int k = rng.uniform_int(static_cast<int>(relevant.images.size()));
      const VectorXd img = random_crop(relevant.images[k], image_hw, image_hw,
                                       config_.crop_pad, rng);
      pos[l].push_back(world_model.encode_mean(img));
    }
    for (int i = 0; i < config_.negatives; ++i) {
      const size_t ep =
          sample_recent_episode_index(buffer, config_.recent_window, rng);
      const auto& episode = buffer.episode(ep);
      const int t = rng.uniform_int(static_cast<int>(episode.obs.size()));
      const VectorXd img = random_crop(episode.obs[t].image, image_hw, image_hw,
                                       config_.crop_pad, rng);
      neg[l].push_back(world_model.encode_mean(img));
    }
  }
  train_members_on_latents(pos, neg);
}

VectorXd RelevanceEnsemble::score(const VectorXd& z) const {
  VectorXd s(size());
  for (int l = 0; l < size(); ++l) s(l) = members_[l].score(z);
  return s;
}

MatrixXd RelevanceEnsemble::score_batch(const MatrixXd& z) const {
  MatrixXd s(z.rows(), size());
  for (int l = 0; l < size(); ++l) s.col(l) = members_[l].score_batch(z);
  return s;
}

double RelevanceEnsemble::aggregate(const VectorXd& scores, RewardMode mode) {
  switch (mode) {
    case RewardMode::max_score:
      return scores.maxCoeff();
    case RewardMode::mean_plus_variance: {
      const double mean = scores.mean();
      double var = 0.0;
      for (int i = 0; i < scores.size(); ++i) {
        const double d = scores(i) - mean;
        var += d * d;
      }
      var /= scores.size();  // population variance
      return mean + var;
    }
    case RewardMode::single:
      return scores(0);
  }
  return scores(0);
}

double RelevanceEnsemble::r_exp(const VectorXd& z, RewardMode mode) const {
  return aggregate(score(z), mode);
}

double RelevanceEnsemble::trajectory_reward(std::span<const VectorXd> latents,
                                            RewardMode mode) const {
  if (latents.empty())
    throw std::invalid_argument("trajectory_reward: empty latent sequence");
  double sum = 0.0;
  for (const VectorXd& z : latents) sum += r_exp(z, mode);
  return sum;
}

std::vector<const ParamTensor*> RelevanceEnsemble::parameters() const {
  std::vector<const ParamTensor*> out;
  for (const auto& m : members_)
    for (const ParamTensor* p : m.parameters()) out.push_back(p);
  return out;
}

void RelevanceEnsemble::save(const std::string& path,
                             std::uint64_t config_hash) const {
  save_checkpoint(path, parameters(), "config_hash", config_hash);
}

void RelevanceEnsemble::load(const std::string& path) {
  std::vector<ParamTensor*> params;
  for (auto& m : members_)
    for (ParamTensor* p : m.parameters()) params.push_back(p);
  load_checkpoint(path, params);
  for (auto& m : members_) m.refresh(10);
}

void RelevanceEnsemble::permute_members_for_testing(const std::vector<int>& order) {
  if (static_cast<int>(order.size()) != size())
    throw std::invalid_argument("permute_members: bad order");
  std::vector<SpectralNet> members;
  for (int idx : order) members.push_back(members_.at(idx));
  members_ = std::move(members);
}

}  // namespace bee

#pragma once

#include <span>
#include <string>
#include <vector>

#include "bee/core/adam.hpp"
#include "bee/core/dense_net.hpp"
#include "bee/core/spectral_norm.hpp"
#include "bee/harness/replay.hpp"
#include "bee/model/world_model.hpp"

namespace bee {

enum class RewardMode { max_score, mean_plus_variance, single };

RewardMode reward_mode_from_string(const std::string& s);
std::string to_string(RewardMode mode);

/// The human-provided supervision: K example observations of relevant
/// states, fixed for the whole run.
struct RelevantSet {
  std::vector<VectorXd> images;
};

/// Dense classifier whose weight matrices are divided by a power-iteration
/// estimate of their largest singular value. Raw weights are trained; a
/// normalized copy is cached for pure scoring. Gradients are mapped back to
/// the raw weights through the normalization (with u, v frozen,
/// sigma = u^T W v, so d sigma / dW = u v^T).
class SpectralNet {
 public:
  SpectralNet() = default;
  SpectralNet(const std::vector<int>& dims, const std::vector<Activation>& acts,
              Rng& rng, const std::string& name_prefix);

  /// Re-estimates each layer's sigma (power_iters iterations) and rebuilds
  /// the normalized copy.
  void refresh(int power_iters);

  /// Rebuilds the normalized copy with sigma = u^T W v and the current u, v
  /// held fixed. The normalized net is then an exactly differentiable
  /// function of the raw weights (finite-difference checks use this).
  void refresh_frozen();

  double score(const VectorXd& z) const;
  VectorXd score_batch(const MatrixXd& z) const;

  /// Forward through the normalized copy with a cache (training path).
  VectorXd forward(const VectorXd& z, DenseCache& cache) const;

  /// Backward of the normalized forward, accumulating into the raw
  /// parameters' gradients.
  void backward_to_raw(const DenseCache& cache, const VectorXd& grad_out);

  DenseNet& raw() { return raw_; }
  const DenseNet& raw() const { return raw_; }
  const DenseNet& normalized() const { return normalized_; }

  std::vector<ParamTensor*> parameters() { return raw_.parameters(); }
  std::vector<const ParamTensor*> parameters() const { return raw_.parameters(); }

 private:
  DenseNet raw_;
  DenseNet normalized_;
  std::vector<SpectralNorm> sn_;
  std::vector<double> sigma_;
};

struct EnsembleConfig {
  int members = 3;
  std::vector<int> hidden = {32, 32};
  double lr = 1e-3;
  double mixup_alpha = 1.0;  // 0 disables mixup
  int positives = 16;
  int negatives = 16;
  int power_iters = 1;
  int crop_pad = 1;
  int recent_window = 500;
  // member updates per collected episode; the full-scale run updates once
  // per episode over 4x as many episodes, so the desk scale keeps the same
  // total optimizer-step budget
  int updates_per_episode = 4;
};

/// Ensemble of L binary relevance discriminators over latent states. The
/// max over member scores is the exploratory reward; the other aggregation
/// modes exist for the ablation study.
class RelevanceEnsemble {
 public:
  RelevanceEnsemble(const EnsembleConfig& config, int latent_dim, Rng& init_rng);

  int size() const { return static_cast<int>(members_.size()); }
  const EnsembleConfig& config() const { return config_; }

  /// One update per member: balanced minibatch (positives from the relevant
  /// set, negatives from recent replay), crop augmentation in image space,
  /// encoding through the frozen world-model encoder (deterministic mode),
  /// mixup on (latent, label) pairs, one Adam step on BCE.
  void train_members(const ReplayBuffer& buffer, const RelevantSet& relevant,
                     const WorldModel& world_model, int image_hw);

  /// Core update on pre-encoded latents; exposed for the synthetic fixtures.
  /// Returns the batch-mean BCE per member.
  std::vector<double> train_members_on_latents(
      const std::vector<std::vector<VectorXd>>& positives_per_member,
      const std::vector<std::vector<VectorXd>>& negatives_per_member);

  VectorXd score(const VectorXd& z) const;
  MatrixXd score_batch(const MatrixXd& z) const;  // rows x members

  double r_exp(const VectorXd& z, RewardMode mode) const;
  double trajectory_reward(std::span<const VectorXd> latents, RewardMode mode) const;

  /// Aggregation arithmetic on a raw member-score vector.
  static double aggregate(const VectorXd& scores, RewardMode mode);

  SpectralNet& member(int i) { return members_.at(i); }
  const SpectralNet& member(int i) const { return members_.at(i); }

  std::vector<const ParamTensor*> parameters() const;
  void save(const std::string& path, std::uint64_t config_hash = 0) const;
  void load(const std::string& path);

  void permute_members_for_testing(const std::vector<int>& order);

 private:
  EnsembleConfig config_;
  int latent_dim_ = 0;
  std::vector<SpectralNet> members_;
  std::vector<AdamOptimizer> opts_;
  std::vector<Rng> member_rngs_;
};

}  // namespace bee

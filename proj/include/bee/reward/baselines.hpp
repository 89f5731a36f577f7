#pragma once

#include <span>
#include <vector>

#include "bee/core/adam.hpp"
#include "bee/harness/replay.hpp"
#include "bee/model/world_model.hpp"

namespace bee {

struct DisagreementConfig {
  int heads = 5;
  std::vector<int> head_hidden = {};
  double lr = 1e-3;
  int batch_size = 32;
  int recent_window = 500;
};

/// Ensemble of independently initialized latent dynamics models sharing the
/// world model's encoder. The exploration reward is the per-step population
/// variance of their predictions, averaged over latent dimensions and
/// summed over the horizon.
class DisagreementEnsemble {
 public:
  DisagreementEnsemble(const DisagreementConfig& config, int latent_dim,
                       int action_dim, Rng& init_rng);

  // the optimizers hold pointers into the heads
  DisagreementEnsemble(const DisagreementEnsemble&) = delete;
  DisagreementEnsemble& operator=(const DisagreementEnsemble&) = delete;

  int size() const { return static_cast<int>(heads_.size()); }

  /// One dynamics update per head, each on its own batch sampled from the
  /// buffer (observations encoded through the shared encoder).
  void update_once(const ReplayBuffer& buffer, const WorldModel& world_model,
                   int horizon, Rng& rng);

  double reward(const VectorXd& z0, std::span<const Action> actions) const;

  /// Batched variant: rows of z0 / action columns are candidates.
  VectorXd reward_batch(const MatrixXd& z0, const std::vector<MatrixXd>& step_actions) const;

  LatentDynamics& head(int i) { return heads_.at(i); }
  const LatentDynamics& head(int i) const { return heads_.at(i); }

  std::vector<const ParamTensor*> parameters() const;

 private:
  DisagreementConfig config_;
  std::vector<LatentDynamics> heads_;
  std::vector<AdamOptimizer> opts_;
};

struct SmmConfig {
  int inner_dim = 16;
  std::vector<int> hidden = {48};
  double beta = 0.5;
  double lr = 1e-3;
  int batch_size = 32;
  int recent_window = 500;
};

/// Small VAE over latent states used as a log-density surrogate (its
/// deterministic ELBO).
class LatentVae {
 public:
  LatentVae() = default;
  LatentVae(const SmmConfig& config, int latent_dim, Rng& rng,
            const std::string& name_prefix);

  double update(const std::vector<VectorXd>& batch, Rng& rng);
  double elbo(const VectorXd& z) const;
  VectorXd elbo_batch(const MatrixXd& z) const;

  DenseNet& encoder() { return enc_; }
  DenseNet& decoder() { return dec_; }
  const DenseNet& encoder() const { return enc_; }
  const DenseNet& decoder() const { return dec_; }
  std::vector<ParamTensor*> parameters();
  std::vector<const ParamTensor*> parameters() const;

 private:
  double beta_ = 0.5;
  DenseNet enc_;
  DenseNet dec_;
  AdamOptimizer opt_;
};

/// State marginal matching reward: elbo under the relevant-state density
/// minus elbo under the visited-state density.
class SmmDensityPair {
 public:
  SmmDensityPair(const SmmConfig& config, int latent_dim, Rng& init_rng);

  /// One update of p* on encoded relevant examples and one of p_policy on
  /// encoded recent replay observations.
  void update_once(const ReplayBuffer& buffer, const std::vector<VectorXd>& example_images,
                   const WorldModel& world_model, Rng& rng);

  double reward(const VectorXd& z) const;
  VectorXd reward_batch(const MatrixXd& z) const;

  LatentVae& p_star() { return p_star_; }
  LatentVae& p_policy() { return p_policy_; }
  const LatentVae& p_star() const { return p_star_; }
  const LatentVae& p_policy() const { return p_policy_; }

 private:
  SmmConfig config_;
  LatentVae p_star_;
  LatentVae p_policy_;
};

/// Uniform action on [-1, 1] per dimension.
Action random_policy(Rng& rng);

}  // namespace bee

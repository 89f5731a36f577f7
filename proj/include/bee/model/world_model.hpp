#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bee/core/adam.hpp"
#include "bee/core/dense_net.hpp"
#include "bee/core/recurrent.hpp"
#include "bee/harness/replay.hpp"

namespace bee {

struct WorldModelConfig {
  int image_hw = 16;
  int latent_dim = 32;
  std::vector<int> enc_hidden = {96};
  std::vector<int> dec_hidden = {96};
  std::vector<int> dyn_head_hidden = {};  // affine head by default
  int action_dim = 2;
  double beta = 1e-3;
  double lr = 1e-3;
  int batch_size = 32;
  int crop_pad = 1;  // 1/16 of the frame, the relative shift the full-scale
                     // setup uses (4 of 64 pixels)
  int recent_window = 500;
  bool parallel = true;

  int image_dim() const { return image_hw * image_hw; }
};

/// Piecewise-constant dynamics training horizon over collected episodes.
struct HorizonSchedule {
  // (episodes_seen < first) -> second; past the last breakpoint -> final.
  std::vector<std::pair<int, int>> breakpoints = {{50, 2}, {150, 4}, {300, 8}};
  int final_horizon = 10;

  int horizon_for(int episodes_seen) const {
    for (const auto& [count, h] : breakpoints)
      if (episodes_seen < count) return h;
    return final_horizon;
  }
};

struct VaeStats {
  double loss = 0.0;
  double recon = 0.0;
  double kl = 0.0;
};

struct TrainStepStats {
  VaeStats vae_replay;
  VaeStats vae_examples;
  double dyn_loss = 0.0;
  int horizon = 0;
};

/// Deterministic latent transition: gated cell stepped with the hidden state
/// set to the current latent, followed by an output head. One bundle per
/// dynamics model (the world model owns one; the disagreement baseline owns
/// five).
class LatentDynamics {
 public:
  LatentDynamics() = default;
  LatentDynamics(int latent_dim, int action_dim,
                 const std::vector<int>& head_hidden, Rng& rng,
                 const std::string& name_prefix);

  int latent_dim() const { return latent_dim_; }
  int action_dim() const { return action_dim_; }

  VectorXd step(const VectorXd& z, const Action& a) const;
  MatrixXd step_batch(const MatrixXd& z, const MatrixXd& a) const;

  std::vector<VectorXd> rollout(const VectorXd& z0,
                                std::span<const Action> actions) const;

  /// Mean over steps of ||target - prediction||^2 with full backprop through
  /// the rollout; gradients land in this model's parameters only.
  double sequence_loss_and_grads(const std::vector<VectorXd>& latents,
                                 std::span<const Action> actions,
                                 GatedCell::Grads& cell_grads,
                                 DenseGrads& head_grads) const;

  GatedCell& cell() { return cell_; }
  DenseNet& head() { return head_; }
  const GatedCell& cell() const { return cell_; }
  const DenseNet& head() const { return head_; }

  std::vector<ParamTensor*> parameters();
  std::vector<const ParamTensor*> parameters() const;

 private:
  int latent_dim_ = 0;
  int action_dim_ = 0;
  GatedCell cell_;
  DenseNet head_;
};

/// Latent world model: VAE encoder/decoder over images plus a deterministic
/// recurrent dynamics model in latent space.
class WorldModel {
 public:
  WorldModel(const WorldModelConfig& config, Rng& init_rng);

  // the optimizers hold pointers into the networks
  WorldModel(const WorldModel&) = delete;
  WorldModel& operator=(const WorldModel&) = delete;

  const WorldModelConfig& config() const { return config_; }

  struct Encoding {
    VectorXd mean;
    VectorXd logvar;
    VectorXd sample;
  };

  Encoding encode(const VectorXd& image, Rng& rng) const;
  VectorXd encode_mean(const VectorXd& image) const;
  MatrixXd encode_mean_batch(const MatrixXd& images) const;
  VectorXd decode(const VectorXd& z) const;
  MatrixXd decode_batch(const MatrixXd& z) const;

  VectorXd dynamics_step(const VectorXd& z, const Action& a) const;
  std::vector<VectorXd> rollout(const VectorXd& z0,
                                std::span<const Action> actions) const;

  /// One Adam update of the VAE on an image batch. Returns batch-mean stats.
  VaeStats vae_update(const std::vector<VectorXd>& images, Rng& rng);

  /// Batch-mean VAE loss with gradients left in the parameters (no step).
  VaeStats vae_loss_and_grads(const std::vector<VectorXd>& images, Rng& rng);

  /// One Adam update of the dynamics on a batch of (observation sequence,
  /// action sequence) segments. Observations are encoded with the current
  /// encoder (sampled); no gradient reaches the encoder.
  double dynamics_update(const std::vector<std::vector<VectorXd>>& obs_segments,
                         const std::vector<std::vector<Action>>& act_segments,
                         Rng& rng);

  double dynamics_loss_and_grads(const std::vector<std::vector<VectorXd>>& obs_segments,
                                 const std::vector<std::vector<Action>>& act_segments,
                                 Rng& rng);

  /// One online training step: a VAE update on a replay batch, a VAE update
  /// on a relevant-example batch (both random-crop augmented), and one
  /// dynamics update at the scheduled horizon.
  TrainStepStats train_step(const ReplayBuffer& buffer,
                            const std::vector<VectorXd>& example_images,
                            int episodes_seen, Rng& rng);

  const HorizonSchedule& horizon_schedule() const { return schedule_; }

  DenseNet& encoder() { return encoder_; }
  DenseNet& decoder() { return decoder_; }
  LatentDynamics& dynamics() { return dynamics_; }
  const DenseNet& encoder() const { return encoder_; }
  const DenseNet& decoder() const { return decoder_; }
  const LatentDynamics& dynamics() const { return dynamics_; }

  std::vector<ParamTensor*> parameters();
  std::vector<const ParamTensor*> parameters() const;
  std::vector<const ParamTensor*> vae_parameters() const;

  void save(const std::string& path, std::uint64_t config_hash = 0) const;
  void load(const std::string& path);

 private:
  struct SampleGrad;

  WorldModelConfig config_;
  HorizonSchedule schedule_;
  DenseNet encoder_;
  DenseNet decoder_;
  LatentDynamics dynamics_;
  AdamOptimizer vae_opt_;
  AdamOptimizer dyn_opt_;
};

/// Helper used by both the world model and the SMM density VAEs: loss and
/// gradients of  ||dec(mean + exp(lv/2)*eps) - x||^2 + beta * KL  for one
/// input, accumulated into the provided gradient sinks.
struct VaeSampleResult {
  double recon = 0.0;
  double kl = 0.0;
};
VaeSampleResult vae_sample_loss_grads(const DenseNet& enc, const DenseNet& dec,
                                      const VectorXd& x, const VectorXd& eps,
                                      double beta, DenseGrads& enc_grads,
                                      DenseGrads& dec_grads);

/// Deterministic ELBO surrogate: -(||dec(mean) - x||^2 + beta * KL).
double vae_elbo_mean(const DenseNet& enc, const DenseNet& dec, const VectorXd& x,
                     double beta);

}  // namespace bee

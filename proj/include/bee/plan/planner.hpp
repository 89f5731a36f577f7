#pragma once

#include <functional>
#include <span>
#include <vector>

#include "bee/core/rng.hpp"
#include "bee/core/tensor.hpp"
#include "bee/harness/replay.hpp"
#include "bee/sim/tabletop.hpp"

namespace bee {

class WorldModel;
class RelevanceEnsemble;
class SmmDensityPair;
class DisagreementEnsemble;
enum class RewardMode;

struct PlanConfig {
  int num_samples = 1000;
  int horizon = 10;
  int cem_iterations = 1;     // exploration; the downstream planner uses 2
  int elite_count = 40;       // CEM refit size (downstream)
  int top_k_choice = 5;       // exploration picks uniformly among the top k
  double epsilon_random = 0.1;
  double action_std = 0.5;    // initial proposal std, clipped to [-1, 1]
  int action_dim = 2;
  int chunk_size = 128;       // fixed work unit; identical arithmetic
                              // whether chunks run serially or in parallel
  bool parallel = true;

  void validate() const;
};

/// Batched one-step latent transition; rows are independent candidates.
struct BatchDynamics {
  int latent_dim = 0;
  std::function<MatrixXd(const MatrixXd& z, const MatrixXd& a)> step;
};

/// Scores one chunk of candidates. step_latents[k] holds the predictions
/// after applying k+1 actions (one row per candidate); actions is the
/// flattened (m x horizon*action_dim) chunk.
struct TrajectoryScorer {
  std::function<VectorXd(const std::vector<MatrixXd>& step_latents,
                         const MatrixXd& actions, const MatrixXd& z0)>
      score;
};

BatchDynamics dynamics_from_world_model(const WorldModel& wm);

/// z' = z + a * W^T ; the closed-form fixture used by planner oracles.
BatchDynamics linear_dynamics(const MatrixXd& w);

/// Adapts a per-candidate reward over the predicted latent sequence.
TrajectoryScorer scorer_from_fn(
    std::function<double(std::span<const VectorXd> latents)> fn, int latent_dim);

TrajectoryScorer make_bee_scorer(const RelevanceEnsemble& ensemble, RewardMode mode);
TrajectoryScorer make_smm_scorer(const SmmDensityPair& pair);
TrajectoryScorer make_disagreement_scorer(const DisagreementEnsemble& ensemble);

/// Clipped-Gaussian action sequences, one candidate per row. Candidate i
/// draws from its own deterministic stream keyed by (stream_base, i), so
/// the sampled set is independent of chunking and threading. mean/stddev
/// are horizon x action_dim.
MatrixXd sample_action_sequences(int num, const MatrixXd& mean,
                                 const MatrixXd& stddev, std::uint64_t stream_base);

/// Rolls every candidate through the dynamics and scores it. Work is split
/// into fixed-size chunks; `parallel` only controls whether chunks run on
/// OpenMP threads, never what is computed.
VectorXd evaluate_candidates(const BatchDynamics& dyn, const TrajectoryScorer& scorer,
                             const VectorXd& z0, const MatrixXd& actions,
                             const PlanConfig& cfg);

/// Candidate indices ordered by score (descending, ties by lower index).
std::vector<int> rank_candidates(const VectorXd& scores);

struct PlanResult {
  VectorXd actions;       // flattened horizon x action_dim
  double chosen_score = 0.0;
  double top_score = 0.0;
  int chosen_index = -1;
};

/// Exploration-time planner: one sampling pass (no refit), uniform choice
/// among the top_k_choice best candidates, then each action independently
/// replaced by a uniform random action with probability epsilon_random.
PlanResult plan_explore(const VectorXd& z0, const BatchDynamics& dyn,
                        const TrajectoryScorer& scorer, const PlanConfig& cfg,
                        Rng& rng);

/// Per-(step, dim) mean and population standard deviation of the
/// elite_count lowest-cost candidates.
std::pair<MatrixXd, MatrixXd> cem_refit(const MatrixXd& actions,
                                        const VectorXd& costs, int elite_count,
                                        int horizon, int action_dim);

/// Mean squared pixel distance between the decoded final predicted latent
/// of each candidate and the goal image.
VectorXd goal_costs(const BatchDynamics& dyn,
                    const std::function<MatrixXd(const MatrixXd&)>& decode_batch,
                    const VectorXd& z0, const MatrixXd& actions,
                    const VectorXd& goal_image, const PlanConfig& cfg);

struct GoalPlanResult {
  VectorXd actions;
  double best_cost = 0.0;
  std::vector<double> iteration_best_costs;
};

/// Downstream CEM: sample, rank by pixel cost to the goal, refit the
/// proposal on the elites, sample again; returns the overall lowest-cost
/// candidate.
GoalPlanResult plan_goal(const VectorXd& z0, const VectorXd& goal_image,
                         const BatchDynamics& dyn,
                         const std::function<MatrixXd(const MatrixXd&)>& decode_batch,
                         const PlanConfig& cfg, Rng& rng);

std::vector<Action> to_actions(const VectorXd& flat);

struct EpisodeLog {
  std::vector<double> plan_top_scores;
  int plan_calls = 0;
};

/// Runs one fixed-horizon episode with replanning every cfg.horizon steps.
Episode act_episode(Env& env, const std::function<VectorXd(const VectorXd&)>& encode,
                    const BatchDynamics& dyn, const TrajectoryScorer& scorer,
                    const PlanConfig& cfg, Rng& rng, EpisodeLog* log = nullptr);

}  // namespace bee

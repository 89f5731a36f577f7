#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "bee/harness/dataset.hpp"
#include "bee/harness/metrics.hpp"
#include "bee/model/world_model.hpp"
#include "bee/plan/planner.hpp"
#include "bee/reward/baselines.hpp"
#include "bee/reward/relevance.hpp"
#include "bee/sim/tabletop.hpp"

namespace bee {

/// Full seeded specification of one exploration run.
struct ExperimentConfig {
  std::string layout_name = "blocks";
  std::optional<nlohmann::json> layout_json;  // overrides layout_name
  std::string method = "bee";  // bee | disagreement | smm | random
  int episodes = 500;
  int warmup_episodes = 20;  // random-action episodes before planning starts
  int num_examples = 100;
  int image_hw = 16;
  std::uint64_t seed = 0;
  int updates_per_episode = 20;
  RewardMode reward_mode = RewardMode::max_score;

  WorldModelConfig model;
  EnsembleConfig ensemble;
  DisagreementConfig disagreement;
  SmmConfig smm;
  PlanConfig plan;

  LayoutSpec make_layout() const;
  void validate() const;

  nlohmann::json to_json() const;
  static ExperimentConfig from_json(const nlohmann::json& j);
  std::uint64_t hash() const;
};

struct RunResult {
  MetricsLog metrics;
  int plan_calls = 0;
  std::uint64_t config_hash = 0;
  std::string dataset_path;
  std::string metrics_path;
};

/// Warmup-style episode under uniformly random actions.
Episode random_episode(Env& env, Rng& rng);

/// Algorithm loop: collect an episode (random during warmup or for the
/// random method, planned otherwise), append it to the dataset, run the
/// scheduled model updates, update the method's reward model, log metrics.
/// Writes dataset.bin, metrics.csv, config.json and checkpoints to out_dir.
/// env_override substitutes the environment (testing seam); it must match
/// the config's layout.
RunResult run_batch_exploration(const ExperimentConfig& config,
                                const std::string& out_dir,
                                Env* env_override = nullptr);

/// Goal-reaching evaluation task; success is judged on ground truth only
/// after the trial ends.
struct DownstreamTask {
  std::string name;
  LayoutSpec layout;
  SimState goal_state;
  std::function<bool(const SimState& final_state, const SimState& initial_state)>
      success;
};

/// Built-in tasks: "open_drawer" (drawer layout; success = extension opened
/// by at least the interaction threshold) and "push_block" (blocks layout;
/// success = target block displaced past the threshold).
DownstreamTask make_downstream_task(const std::string& name);

struct DownstreamConfig {
  WorldModelConfig model;
  int training_updates = 5000;
  PlanConfig plan;  // defaults set in the constructor below
  DownstreamConfig() {
    plan.num_samples = 200;
    plan.cem_iterations = 2;
    plan.elite_count = 40;
    plan.top_k_choice = 1;
    plan.epsilon_random = 0.0;
  }
};

/// Planner seam for tests: maps (z0, goal image) to a flat action sequence.
using GoalPlanner = std::function<VectorXd(const VectorXd& z0, const VectorXd& goal)>;

/// Trains a fresh world model offline on the dataset, then runs goal-
/// reaching trials with CEM planning; returns the success fraction.
double run_downstream_eval(const Dataset& dataset, const DownstreamTask& task,
                           int trials, const DownstreamConfig& config,
                           std::uint64_t seed,
                           const GoalPlanner& planner_override = nullptr);

struct SweepSpec {
  std::string kind;  // "mode" or "latent"
  std::vector<std::string> modes;
  std::vector<int> latent_dims;
  std::vector<std::uint64_t> seeds;

  /// e.g. "mode=max,mean_plus_variance,single" or "latent=8,16,32,64"
  static SweepSpec parse(const std::string& spec,
                         const std::vector<std::uint64_t>& seeds);
  std::vector<std::string> setting_names() const;
};

/// Runs one exploration per (setting, seed) into out_dir/<setting>_seed<N>
/// and writes out_dir/ablation_report.csv. Returns the run directories.
std::vector<std::string> run_ablation(const ExperimentConfig& base,
                                      const SweepSpec& sweep,
                                      const std::string& out_dir);

/// Rebuilds the comparison report from metric files alone.
/// Rows: kind=curve  -> setting, window index, mean frequency, standard
///                      error across seeds;
///       kind=window_variance -> setting, seed, variance of the per-window
///                      frequencies of that run.
void write_ablation_report(const std::vector<std::string>& run_dirs,
                           const std::string& out_csv, int window = 100);

/// Plain per-run report: dir, window index, interaction frequency.
void write_report(const std::vector<std::string>& run_dirs,
                  const std::string& out_csv, int window = 100);

}  // namespace bee

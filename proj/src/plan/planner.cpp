#include "bee/plan/planner.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "bee/model/world_model.hpp"
#include "bee/reward/baselines.hpp"
#include "bee/reward/relevance.hpp"

namespace bee {

namespace {
double clip1(double v) { return v < -1.0 ? -1.0 : (v > 1.0 ? 1.0 : v); }
}

void PlanConfig::validate() const {
  if (num_samples <= 0)
    throw std::invalid_argument("plan: num_samples must be positive");
  if (horizon <= 0) throw std::invalid_argument("plan: horizon must be positive");
  if (cem_iterations < 1)
    throw std::invalid_argument("plan: cem_iterations must be >= 1");
  if (elite_count <= 0 || elite_count > num_samples)
    throw std::invalid_argument("plan: elite_count must be in [1, num_samples]");
  if (top_k_choice <= 0 || top_k_choice > num_samples)
    throw std::invalid_argument("plan: top_k_choice must be in [1, num_samples]");
  if (epsilon_random < 0.0 || epsilon_random > 1.0)
    throw std::invalid_argument("plan: epsilon_random must be in [0, 1]");
  if (action_dim <= 0) throw std::invalid_argument("plan: action_dim must be positive");
  if (chunk_size <= 0) throw std::invalid_argument("plan: chunk_size must be positive");
}

BatchDynamics dynamics_from_world_model(const WorldModel& wm) {
  BatchDynamics dyn;
  dyn.latent_dim = wm.config().latent_dim;
  dyn.step = [&wm](const MatrixXd& z, const MatrixXd& a) {
    return wm.dynamics().step_batch(z, a);
  };
  return dyn;
}

BatchDynamics linear_dynamics(const MatrixXd& w) {
  BatchDynamics dyn;
  dyn.latent_dim = static_cast<int>(w.rows());
  dyn.step = [w](const MatrixXd& z, const MatrixXd& a) -> MatrixXd {
    return z + a * w.transpose();
  };
  return dyn;
}

TrajectoryScorer scorer_from_fn(
    std::function<double(std::span<const VectorXd> latents)> fn, int latent_dim) {
  TrajectoryScorer scorer;
  scorer.score = [fn, latent_dim](const std::vector<MatrixXd>& step_latents,
                                  const MatrixXd& /*actions*/,
                                  const MatrixXd& /*z0*/) -> VectorXd {
    const int m = static_cast<int>(step_latents.front().rows());
    VectorXd out(m);
    std::vector<VectorXd> traj(step_latents.size());
    for (int i = 0; i < m; ++i) {
      for (size_t k = 0; k < step_latents.size(); ++k)
        traj[k] = step_latents[k].row(i).transpose();
      out(i) = fn(traj);
    }
    return out;
  };
  return scorer;
}

TrajectoryScorer make_bee_scorer(const RelevanceEnsemble& ensemble, RewardMode mode) {
  TrajectoryScorer scorer;
  scorer.score = [&ensemble, mode](const std::vector<MatrixXd>& step_latents,
                                   const MatrixXd&, const MatrixXd&) -> VectorXd {
    const int m = static_cast<int>(step_latents.front().rows());
    VectorXd total = VectorXd::Zero(m);
    for (const MatrixXd& z : step_latents) {
      const MatrixXd member_scores = ensemble.score_batch(z);
      for (int i = 0; i < m; ++i)
        total(i) += RelevanceEnsemble::aggregate(member_scores.row(i).transpose(), mode);
    }
    return total;
  };
  return scorer;
}

TrajectoryScorer make_smm_scorer(const SmmDensityPair& pair) {
  TrajectoryScorer scorer;
  scorer.score = [&pair](const std::vector<MatrixXd>& step_latents, const MatrixXd&,
                         const MatrixXd&) -> VectorXd {
    VectorXd total = VectorXd::Zero(step_latents.front().rows());
    for (const MatrixXd& z : step_latents) total += pair.reward_batch(z);
    return total;
  };
  return scorer;
}

TrajectoryScorer make_disagreement_scorer(const DisagreementEnsemble& ensemble) {
  TrajectoryScorer scorer;
  scorer.score = [&ensemble](const std::vector<MatrixXd>& step_latents,
                             const MatrixXd& actions, const MatrixXd& z0) -> VectorXd {
    // re-rolls through the ensemble heads; the shared-model latents are unused
    const int m = static_cast<int>(actions.rows());
    const int horizon = static_cast<int>(step_latents.size());
    const int adim = static_cast<int>(actions.cols()) / horizon;
    std::vector<MatrixXd> step_actions;
    step_actions.reserve(horizon);
    for (int k = 0; k < horizon; ++k)
      step_actions.push_back(actions.middleCols(k * adim, adim));
    (void)m;
    return ensemble.reward_batch(z0, step_actions);
  };
  return scorer;
}

MatrixXd sample_action_sequences(int num, const MatrixXd& mean,
                                 const MatrixXd& stddev, std::uint64_t stream_base) {
  const int horizon = static_cast<int>(mean.rows());
  const int adim = static_cast<int>(mean.cols());
  MatrixXd actions(num, horizon * adim);
  for (int i = 0; i < num; ++i) {
    Rng rng = Rng::stream(stream_base, static_cast<std::uint64_t>(i));
    for (int h = 0; h < horizon; ++h)
      for (int d = 0; d < adim; ++d)
        actions(i, h * adim + d) = clip1(mean(h, d) + stddev(h, d) * rng.normal());
  }
  return actions;
}

VectorXd evaluate_candidates(const BatchDynamics& dyn, const TrajectoryScorer& scorer,
                             const VectorXd& z0, const MatrixXd& actions,
                             const PlanConfig& cfg) {
  const int m = static_cast<int>(actions.rows());
  const int horizon = static_cast<int>(actions.cols()) / cfg.action_dim;
  VectorXd scores(m);
  const int n_chunks = (m + cfg.chunk_size - 1) / cfg.chunk_size;
#pragma omp parallel for schedule(static) if (cfg.parallel)
  for (int c = 0; c < n_chunks; ++c) {
    const int lo = c * cfg.chunk_size;
    const int len = std::min(cfg.chunk_size, m - lo);
    const MatrixXd chunk_actions = actions.middleRows(lo, len);
    MatrixXd z = z0.transpose().replicate(len, 1);
    std::vector<MatrixXd> step_latents;
    step_latents.reserve(horizon);
    for (int k = 0; k < horizon; ++k) {
      z = dyn.step(z, chunk_actions.middleCols(k * cfg.action_dim, cfg.action_dim));
      step_latents.push_back(z);
    }
    scores.segment(lo, len) =
        scorer.score(step_latents, chunk_actions,
                     z0.transpose().replicate(len, 1));
  }
  return scores;
}

std::vector<int> rank_candidates(const VectorXd& scores) {
  std::vector<int> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&scores](int a, int b) { return scores(a) > scores(b); });
  return order;
}

PlanResult plan_explore(const VectorXd& z0, const BatchDynamics& dyn,
                        const TrajectoryScorer& scorer, const PlanConfig& cfg,
                        Rng& rng) {
  cfg.validate();
  const std::uint64_t base = rng.next_u64();
  const MatrixXd mean = MatrixXd::Zero(cfg.horizon, cfg.action_dim);
  const MatrixXd stddev =
      MatrixXd::Constant(cfg.horizon, cfg.action_dim, cfg.action_std);
  const MatrixXd actions = sample_action_sequences(cfg.num_samples, mean, stddev, base);
  const VectorXd scores = evaluate_candidates(dyn, scorer, z0, actions, cfg);
  const std::vector<int> order = rank_candidates(scores);

  const int k = std::min<int>(cfg.top_k_choice, cfg.num_samples);
  const int chosen = order[rng.uniform_int(k)];

  PlanResult result;
  result.actions = actions.row(chosen).transpose();
  result.chosen_index = chosen;
  result.chosen_score = scores(chosen);
  result.top_score = scores(order[0]);

  // epsilon-randomization happens per executed action, after selection
  for (int h = 0; h < cfg.horizon; ++h) {
    if (rng.uniform() < cfg.epsilon_random) {
      for (int d = 0; d < cfg.action_dim; ++d)
        result.actions(h * cfg.action_dim + d) = rng.uniform(-1.0, 1.0);
    }
  }
  return result;
}

std::pair<MatrixXd, MatrixXd> cem_refit(const MatrixXd& actions,
                                        const VectorXd& costs, int elite_count,
                                        int horizon, int action_dim) {
  if (elite_count <= 0 || elite_count > actions.rows())
    throw std::invalid_argument("cem_refit: bad elite count");
  std::vector<int> order(actions.rows());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&costs](int a, int b) { return costs(a) < costs(b); });

  MatrixXd mean = MatrixXd::Zero(horizon, action_dim);
  for (int e = 0; e < elite_count; ++e) {
    const auto row = actions.row(order[e]);
    for (int h = 0; h < horizon; ++h)
      for (int d = 0; d < action_dim; ++d) mean(h, d) += row(h * action_dim + d);
  }
  mean /= elite_count;

  MatrixXd var = MatrixXd::Zero(horizon, action_dim);
  for (int e = 0; e < elite_count; ++e) {
    const auto row = actions.row(order[e]);
    for (int h = 0; h < horizon; ++h)
      for (int d = 0; d < action_dim; ++d) {
        const double delta = row(h * action_dim + d) - mean(h, d);
        var(h, d) += delta * delta;
      }
  }
  var /= elite_count;
  return {mean, var.cwiseSqrt()};
}

VectorXd goal_costs(const BatchDynamics& dyn,
                    const std::function<MatrixXd(const MatrixXd&)>& decode_batch,
                    const VectorXd& z0, const MatrixXd& actions,
                    const VectorXd& goal_image, const PlanConfig& cfg) {
  const int m = static_cast<int>(actions.rows());
  const int horizon = static_cast<int>(actions.cols()) / cfg.action_dim;
  VectorXd costs(m);
  const int n_chunks = (m + cfg.chunk_size - 1) / cfg.chunk_size;
#pragma omp parallel for schedule(static) if (cfg.parallel)
  for (int c = 0; c < n_chunks; ++c) {
    const int lo = c * cfg.chunk_size;
    const int len = std::min(cfg.chunk_size, m - lo);
    const MatrixXd chunk_actions = actions.middleRows(lo, len);
    MatrixXd z = z0.transpose().replicate(len, 1);
    for (int k = 0; k < horizon; ++k)
      z = dyn.step(z, chunk_actions.middleCols(k * cfg.action_dim, cfg.action_dim));
    const MatrixXd decoded = decode_batch(z);
    for (int i = 0; i < len; ++i)
      costs(lo + i) =
          (decoded.row(i).transpose() - goal_image).squaredNorm() / goal_image.size();
  }
  return costs;
}

GoalPlanResult plan_goal(const VectorXd& z0, const VectorXd& goal_image,
                         const BatchDynamics& dyn,
                         const std::function<MatrixXd(const MatrixXd&)>& decode_batch,
                         const PlanConfig& cfg, Rng& rng) {
  cfg.validate();
  MatrixXd mean = MatrixXd::Zero(cfg.horizon, cfg.action_dim);
  MatrixXd stddev = MatrixXd::Constant(cfg.horizon, cfg.action_dim, cfg.action_std);

  GoalPlanResult result;
  bool have_best = false;
  for (int it = 0; it < cfg.cem_iterations; ++it) {
    const std::uint64_t base = rng.next_u64();
    const MatrixXd actions =
        sample_action_sequences(cfg.num_samples, mean, stddev, base);
    const VectorXd costs = goal_costs(dyn, decode_batch, z0, actions, goal_image, cfg);

    int best_idx = 0;
    for (int i = 1; i < costs.size(); ++i)
      if (costs(i) < costs(best_idx)) best_idx = i;
    result.iteration_best_costs.push_back(costs(best_idx));
    if (!have_best || costs(best_idx) < result.best_cost) {
      result.best_cost = costs(best_idx);
      result.actions = actions.row(best_idx).transpose();
      have_best = true;
    }

    if (it + 1 < cfg.cem_iterations) {
      auto [new_mean, new_std] =
          cem_refit(actions, costs, cfg.elite_count, cfg.horizon, cfg.action_dim);
      mean = new_mean;
      stddev = new_std.cwiseMax(1e-3);
    }
  }
  return result;
}

std::vector<Action> to_actions(const VectorXd& flat) {
  if (flat.size() % 2 != 0)
    throw std::invalid_argument("to_actions: expected 2-d actions");
  std::vector<Action> out;
  out.reserve(flat.size() / 2);
  for (int h = 0; h < flat.size() / 2; ++h)
    out.push_back(Action{flat(2 * h), flat(2 * h + 1)});
  return out;
}

Episode act_episode(Env& env, const std::function<VectorXd(const VectorXd&)>& encode,
                    const BatchDynamics& dyn, const TrajectoryScorer& scorer,
                    const PlanConfig& cfg, Rng& rng, EpisodeLog* log) {
  if (cfg.action_dim != 2)
    throw std::invalid_argument("act_episode: environment actions are 2-d");
  const int T = env.horizon();
  if (T % cfg.horizon != 0)
    throw std::invalid_argument("act_episode: episode horizon " + std::to_string(T) +
                                " is not a multiple of the plan horizon " +
                                std::to_string(cfg.horizon));
  Episode episode;
  Observation obs = env.reset();
  episode.obs.push_back(obs);
  for (int seg = 0; seg < T / cfg.horizon; ++seg) {
    const VectorXd z0 = encode(obs.image);
    const PlanResult plan = plan_explore(z0, dyn, scorer, cfg, rng);
    if (log) {
      log->plan_top_scores.push_back(plan.top_score);
      ++log->plan_calls;
    }
    for (const Action& a : to_actions(plan.actions)) {
      obs = env.step(a);
      episode.actions.push_back(a);
      episode.obs.push_back(obs);
    }
  }
  return episode;
}

}  // namespace bee

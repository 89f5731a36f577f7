#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "bee/plan/planner.hpp"
#include "bee/sim/tabletop.hpp"

using namespace bee;

namespace {

// per-candidate reward on the final latent of a 1-d fixture
TrajectoryScorer final_distance_reward(double target) {
  return scorer_from_fn(
      [target](std::span<const VectorXd> latents) {
        return -std::abs(latents.back()(0) - target);
      },
      1);
}

PlanConfig small_cfg(int m, int horizon, int action_dim) {
  PlanConfig cfg;
  cfg.num_samples = m;
  cfg.horizon = horizon;
  cfg.action_dim = action_dim;
  cfg.elite_count = std::min(10, m);
  cfg.top_k_choice = std::min(5, m);
  cfg.chunk_size = 7;  // force multi-chunk paths in tests
  return cfg;
}

// independent oracle: roll and score each candidate with plain loops
std::vector<double> brute_force_scores(const MatrixXd& actions, double z0,
                                       double target, int horizon) {
  std::vector<double> scores;
  for (int i = 0; i < actions.rows(); ++i) {
    double z = z0;
    for (int k = 0; k < horizon; ++k) z += actions(i, k);
    scores.push_back(-std::abs(z - target));
  }
  return scores;
}

}  // namespace

TEST_CASE("plan_explore: degenerate selection returns the exact argmax candidate") {
  const BatchDynamics dyn = linear_dynamics(MatrixXd::Identity(1, 1));
  const TrajectoryScorer scorer = final_distance_reward(3.0);
  PlanConfig cfg = small_cfg(48, 4, 1);
  cfg.top_k_choice = 1;
  cfg.epsilon_random = 0.0;

  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    Rng probe = rng;  // same stream: recover the candidate set
    const PlanResult result = plan_explore(VectorXd::Zero(1), dyn, scorer, cfg, rng);

    const std::uint64_t base = probe.next_u64();
    const MatrixXd actions = sample_action_sequences(
        cfg.num_samples, MatrixXd::Zero(4, 1),
        MatrixXd::Constant(4, 1, cfg.action_std), base);
    const auto scores = brute_force_scores(actions, 0.0, 3.0, 4);
    int best = 0;
    for (size_t i = 1; i < scores.size(); ++i)
      if (scores[i] > scores[best]) best = static_cast<int>(i);
    CHECK(result.chosen_index == best);
    CHECK((result.actions - actions.row(best).transpose()).cwiseAbs().maxCoeff() ==
          0.0);
    CHECK(result.chosen_score == doctest::Approx(scores[best]).epsilon(1e-12));
  }
}

TEST_CASE("evaluate_candidates: forced candidate set {-1,0,+1} ranks +1 first") {
  const BatchDynamics dyn = linear_dynamics(MatrixXd::Identity(1, 1));
  const TrajectoryScorer scorer = final_distance_reward(3.0);
  PlanConfig cfg = small_cfg(3, 1, 1);
  MatrixXd actions(3, 1);
  actions << -1.0, 0.0, 1.0;
  const VectorXd scores =
      evaluate_candidates(dyn, scorer, VectorXd::Zero(1), actions, cfg);
  CHECK(scores(0) == doctest::Approx(-4.0));
  CHECK(scores(1) == doctest::Approx(-3.0));
  CHECK(scores(2) == doctest::Approx(-2.0));
  const auto order = rank_candidates(scores);
  CHECK(order[0] == 2);  // matches exhaustive enumeration
}

TEST_CASE("plan_explore: constant reward still emits bounded in-set actions") {
  const BatchDynamics dyn = linear_dynamics(MatrixXd::Identity(2, 2));
  const TrajectoryScorer scorer =
      scorer_from_fn([](std::span<const VectorXd>) { return 1.0; }, 2);
  PlanConfig cfg = small_cfg(32, 5, 2);
  cfg.epsilon_random = 0.0;
  Rng rng(7);
  Rng probe = rng;
  const PlanResult result = plan_explore(VectorXd::Zero(2), dyn, scorer, cfg, rng);
  CHECK(result.actions.cwiseAbs().maxCoeff() <= 1.0);
  const std::uint64_t base = probe.next_u64();
  const MatrixXd actions = sample_action_sequences(
      32, MatrixXd::Zero(5, 2), MatrixXd::Constant(5, 2, cfg.action_std), base);
  bool found = false;
  for (int i = 0; i < actions.rows(); ++i)
    found = found ||
            (result.actions - actions.row(i).transpose()).cwiseAbs().maxCoeff() == 0.0;
  CHECK(found);
}

TEST_CASE("plan_explore: zero candidates is a configuration error") {
  const BatchDynamics dyn = linear_dynamics(MatrixXd::Identity(1, 1));
  PlanConfig cfg = small_cfg(1, 2, 1);
  cfg.num_samples = 0;
  Rng rng(1);
  CHECK_THROWS_AS(
      plan_explore(VectorXd::Zero(1), dyn, final_distance_reward(0.0), cfg, rng),
      std::invalid_argument);
}

TEST_CASE("plan_explore: positive reward scaling never changes the selection") {
  const BatchDynamics dyn = linear_dynamics(MatrixXd::Identity(1, 1));
  PlanConfig cfg = small_cfg(64, 3, 1);
  cfg.epsilon_random = 0.0;
  const TrajectoryScorer s1 = final_distance_reward(2.0);
  const TrajectoryScorer s2 = scorer_from_fn(
      [](std::span<const VectorXd> latents) {
        return 37.5 * -std::abs(latents.back()(0) - 2.0);
      },
      1);
  for (std::uint64_t seed = 100; seed < 110; ++seed) {
    Rng ra(seed), rb(seed);
    const auto a = plan_explore(VectorXd::Zero(1), dyn, s1, cfg, ra);
    const auto b = plan_explore(VectorXd::Zero(1), dyn, s2, cfg, rb);
    CHECK(a.chosen_index == b.chosen_index);
  }
}

TEST_CASE("plan_explore: emitted actions always stay within [-1, 1]") {
  const BatchDynamics dyn = linear_dynamics(MatrixXd::Identity(2, 2));
  PlanConfig cfg = small_cfg(16, 6, 2);
  cfg.action_std = 3.0;  // force heavy clipping
  cfg.epsilon_random = 0.5;
  const TrajectoryScorer scorer =
      scorer_from_fn([](std::span<const VectorXd> l) { return l.back().sum(); }, 2);
  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const auto result = plan_explore(VectorXd::Zero(2), dyn, scorer, cfg, rng);
    CHECK(result.actions.maxCoeff() <= 1.0);
    CHECK(result.actions.minCoeff() >= -1.0);
  }
}

TEST_CASE("plan_explore: epsilon = 1 gives uniform executed actions") {
  const BatchDynamics dyn = linear_dynamics(MatrixXd::Identity(2, 2));
  PlanConfig cfg = small_cfg(4, 10, 2);
  cfg.epsilon_random = 1.0;
  const TrajectoryScorer scorer =
      scorer_from_fn([](std::span<const VectorXd>) { return 0.0; }, 2);
  Rng rng(9);
  double sum_x = 0.0, sum_y = 0.0;
  int n = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const auto result = plan_explore(VectorXd::Zero(2), dyn, scorer, cfg, rng);
    for (int h = 0; h < 10; ++h) {
      sum_x += result.actions(2 * h);
      sum_y += result.actions(2 * h + 1);
      ++n;
    }
  }
  CHECK(std::abs(sum_x / n) < 0.05);
  CHECK(std::abs(sum_y / n) < 0.05);
}

TEST_CASE("cem_refit: mean equals the arithmetic mean of the elites") {
  Rng rng(10);
  const int m = 100, horizon = 10, adim = 2, elites = 40;
  MatrixXd actions(m, horizon * adim);
  VectorXd costs(m);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < horizon * adim; ++j) actions(i, j) = rng.uniform(-1, 1);
    costs(i) = rng.uniform();
  }
  const auto [mean, stddev] = cem_refit(actions, costs, elites, horizon, adim);

  std::vector<int> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&costs](int a, int b) { return costs(a) < costs(b); });
  MatrixXd expect = MatrixXd::Zero(horizon, adim);
  for (int e = 0; e < elites; ++e)
    for (int h = 0; h < horizon; ++h)
      for (int d = 0; d < adim; ++d)
        expect(h, d) += actions(order[e], h * adim + d);
  expect /= elites;
  CHECK((mean - expect).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(stddev.minCoeff() >= 0.0);
}

TEST_CASE("goal planning: already-at-goal keeps the zero-action candidate on top") {
  // identity dynamics; decoding is the identity on a 1-pixel image
  const BatchDynamics dyn = linear_dynamics(MatrixXd::Zero(1, 1));
  const auto decode = [](const MatrixXd& z) { return z; };
  PlanConfig cfg = small_cfg(4, 2, 1);
  VectorXd z0(1);
  z0 << 0.8;
  MatrixXd actions(4, 2);
  actions << 0.0, 0.0, 0.5, -0.5, -1.0, 1.0, 0.3, 0.3;
  const VectorXd costs = goal_costs(dyn, decode, z0, actions, z0, cfg);
  for (int i = 0; i < 4; ++i) CHECK(costs(i) == 0.0);  // dynamics ignore actions
  // the argmin scan keeps the first (zero-action) candidate on ties
  int best = 0;
  for (int i = 1; i < 4; ++i)
    if (costs(i) < costs(best)) best = i;
  CHECK(best == 0);
}

TEST_CASE("goal planning: refit pulls the proposal toward the reachable optimum") {
  // z' = z + a, goal at 0.6, one-step plans
  const BatchDynamics dyn = linear_dynamics(MatrixXd::Identity(1, 1));
  const auto decode = [](const MatrixXd& z) { return z; };
  PlanConfig cfg = small_cfg(50, 1, 1);
  cfg.elite_count = 10;
  VectorXd goal(1);
  goal << 0.6;
  double total_err = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(900 + seed);
    const std::uint64_t base = rng.next_u64();
    const MatrixXd actions = sample_action_sequences(
        cfg.num_samples, MatrixXd::Zero(1, 1),
        MatrixXd::Constant(1, 1, cfg.action_std), base);
    const VectorXd costs =
        goal_costs(dyn, decode, VectorXd::Zero(1), actions, goal, cfg);
    const auto [mean, stddev] = cem_refit(actions, costs, cfg.elite_count, 1, 1);
    total_err += std::abs(mean(0, 0) - 0.6);
  }
  CHECK(total_err / 20.0 < 0.3);
}

TEST_CASE("goal planning: two CEM iterations beat one in at least 90% of seeded runs") {
  const BatchDynamics dyn = linear_dynamics(MatrixXd::Identity(1, 1));
  const auto decode = [](const MatrixXd& z) { return z; };
  // downstream-planner scale: 200 samples refit to the top 40
  PlanConfig cfg = small_cfg(200, 3, 1);
  cfg.cem_iterations = 2;
  cfg.elite_count = 40;
  // a goal in the tail of the initial proposal, where the refit matters
  VectorXd goal(1);
  goal << 2.4;
  int improved = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(3000 + seed);
    const auto result = plan_goal(VectorXd::Zero(1), goal, dyn, decode, cfg, rng);
    REQUIRE(result.iteration_best_costs.size() == 2);
    if (result.iteration_best_costs[1] <= result.iteration_best_costs[0]) ++improved;
  }
  CHECK(improved >= 90);
}

TEST_CASE("act_episode: five plans for a 50-step episode, bookkeeping intact") {
  TabletopEnv env(LayoutSpec::preset("blocks"), 8);
  const BatchDynamics dyn = linear_dynamics(MatrixXd::Zero(3, 2));
  const TrajectoryScorer scorer =
      scorer_from_fn([](std::span<const VectorXd>) { return 0.0; }, 3);
  PlanConfig cfg = small_cfg(8, 10, 2);
  Rng rng(11);
  const auto encode = [](const VectorXd&) { return VectorXd::Zero(3); };
  EpisodeLog log;
  const Episode episode = act_episode(env, encode, dyn, scorer, cfg, rng, &log);
  CHECK(log.plan_calls == 5);
  CHECK(episode.actions.size() == 50);
  CHECK(episode.obs.size() == 51);
}

TEST_CASE("act_episode: horizon mismatch is a configuration error") {
  TabletopEnv env(LayoutSpec::preset("blocks"), 8);
  const BatchDynamics dyn = linear_dynamics(MatrixXd::Zero(3, 2));
  const TrajectoryScorer scorer =
      scorer_from_fn([](std::span<const VectorXd>) { return 0.0; }, 3);
  PlanConfig cfg = small_cfg(8, 7, 2);
  Rng rng(12);
  const auto encode = [](const VectorXd&) { return VectorXd::Zero(3); };
  CHECK_THROWS_AS(act_episode(env, encode, dyn, scorer, cfg, rng, nullptr),
                  std::invalid_argument);
}

// The OpenMP kernels must be bit-identical to their serial reference at any
// thread count: work is split into fixed-size chunks (planner) or reduced in
// sample order (training), so threading never changes the arithmetic.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <omp.h>

#include "bee/model/world_model.hpp"
#include "bee/plan/planner.hpp"
#include "bee/reward/relevance.hpp"

using namespace bee;

namespace {

WorldModelConfig small_cfg(bool parallel) {
  WorldModelConfig cfg;
  cfg.image_hw = 8;
  cfg.latent_dim = 8;
  cfg.enc_hidden = {24};
  cfg.dec_hidden = {24};
  cfg.batch_size = 16;
  cfg.parallel = parallel;
  return cfg;
}

std::vector<VectorXd> random_images(int n, int dim, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<VectorXd> out;
  for (int i = 0; i < n; ++i) {
    VectorXd img(dim);
    for (int j = 0; j < dim; ++j) img(j) = rng.uniform();
    out.push_back(img);
  }
  return out;
}

}  // namespace

TEST_CASE("plan_explore: serial and OpenMP paths select identical plans") {
  Rng wm_rng(1);
  WorldModel wm(small_cfg(true), wm_rng);
  Rng ens_rng(2);
  RelevanceEnsemble ensemble(EnsembleConfig{}, 8, ens_rng);
  const BatchDynamics dyn = dynamics_from_world_model(wm);
  const TrajectoryScorer scorer = make_bee_scorer(ensemble, RewardMode::max_score);

  VectorXd z0(8);
  Rng zr(3);
  for (int i = 0; i < 8; ++i) z0(i) = zr.normal();

  PlanConfig cfg;
  cfg.num_samples = 100;
  cfg.horizon = 10;
  cfg.chunk_size = 16;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    cfg.parallel = false;
    Rng ra(seed);
    const PlanResult serial = plan_explore(z0, dyn, scorer, cfg, ra);
    cfg.parallel = true;
    Rng rb(seed);
    const PlanResult parallel = plan_explore(z0, dyn, scorer, cfg, rb);
    CHECK(serial.chosen_index == parallel.chosen_index);
    CHECK(serial.top_score == parallel.top_score);
    CHECK((serial.actions - parallel.actions).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("goal_costs: serial and OpenMP paths agree bitwise") {
  Rng wm_rng(4);
  WorldModel wm(small_cfg(true), wm_rng);
  const BatchDynamics dyn = dynamics_from_world_model(wm);
  const auto decode = [&wm](const MatrixXd& z) { return wm.decode_batch(z); };
  VectorXd z0 = VectorXd::Zero(8);
  VectorXd goal(64);
  Rng gr(5);
  for (int i = 0; i < 64; ++i) goal(i) = gr.uniform();
  const MatrixXd actions = sample_action_sequences(
      60, MatrixXd::Zero(10, 2), MatrixXd::Constant(10, 2, 0.5), 99);
  PlanConfig cfg;
  cfg.num_samples = 60;
  cfg.horizon = 10;
  cfg.chunk_size = 9;
  cfg.parallel = false;
  const VectorXd serial = goal_costs(dyn, decode, z0, actions, goal, cfg);
  cfg.parallel = true;
  const VectorXd parallel = goal_costs(dyn, decode, z0, actions, goal, cfg);
  CHECK((serial - parallel).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("vae_update: parallel per-sample gradients reproduce the serial result") {
  const auto images = random_images(16, 64, 6);
  Rng init_a(7);
  WorldModel serial(small_cfg(false), init_a);
  Rng init_b(7);
  WorldModel parallel(small_cfg(true), init_b);
  REQUIRE(param_hash(std::as_const(serial).parameters()) ==
          param_hash(std::as_const(parallel).parameters()));
  for (int u = 0; u < 5; ++u) {
    Rng ra(100 + u), rb(100 + u);
    serial.vae_update(images, ra);
    parallel.vae_update(images, rb);
  }
  CHECK(param_hash(std::as_const(serial).parameters()) ==
        param_hash(std::as_const(parallel).parameters()));
}

TEST_CASE("dynamics_update: parallel per-segment gradients reproduce the serial result") {
  Rng data_rng(8);
  std::vector<std::vector<VectorXd>> obs_seg(12);
  std::vector<std::vector<Action>> act_seg(12);
  for (int i = 0; i < 12; ++i) {
    for (int t = 0; t < 4; ++t) {
      VectorXd img(64);
      for (int j = 0; j < 64; ++j) img(j) = data_rng.uniform();
      obs_seg[i].push_back(img);
    }
    for (int t = 0; t < 3; ++t)
      act_seg[i].push_back(Action{data_rng.uniform(-1, 1), data_rng.uniform(-1, 1)});
  }
  Rng init_a(9);
  WorldModel serial(small_cfg(false), init_a);
  Rng init_b(9);
  WorldModel parallel(small_cfg(true), init_b);
  Rng ra(200), rb(200);
  const double loss_a = serial.dynamics_update(obs_seg, act_seg, ra);
  const double loss_b = parallel.dynamics_update(obs_seg, act_seg, rb);
  CHECK(loss_a == loss_b);
  CHECK(param_hash(std::as_const(serial).parameters()) ==
        param_hash(std::as_const(parallel).parameters()));
}

TEST_CASE("thread count does not change results") {
  const auto images = random_images(16, 64, 10);
  auto run_with_threads = [&images](int threads) {
    const int before = omp_get_max_threads();
    omp_set_num_threads(threads);
    Rng init(11);
    WorldModel wm(small_cfg(true), init);
    for (int u = 0; u < 3; ++u) {
      Rng r(300 + u);
      wm.vae_update(images, r);
    }
    omp_set_num_threads(before);
    return param_hash(std::as_const(wm).parameters());
  };
  CHECK(run_with_threads(1) == run_with_threads(2));
}

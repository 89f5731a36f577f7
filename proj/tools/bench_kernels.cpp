// Serial vs OpenMP timings for the two hot paths: planner candidate
// evaluation and per-sample batch gradients.
#include <benchmark/benchmark.h>

#include "bee/model/world_model.hpp"
#include "bee/plan/planner.hpp"
#include "bee/reward/relevance.hpp"

namespace {

struct Fixture {
  bee::WorldModelConfig model_cfg;
  bee::WorldModel wm;
  bee::RelevanceEnsemble ensemble;
  bee::VectorXd z0;
  std::vector<bee::VectorXd> images;

  static bee::WorldModelConfig make_cfg() {
    bee::WorldModelConfig cfg;
    cfg.image_hw = 16;
    cfg.latent_dim = 32;
    return cfg;
  }

  Fixture()
      : model_cfg(make_cfg()),
        wm(model_cfg, rng()),
        ensemble(bee::EnsembleConfig{}, model_cfg.latent_dim, rng()) {
    bee::Rng r(7);
    z0 = bee::VectorXd::Zero(model_cfg.latent_dim);
    for (int i = 0; i < model_cfg.latent_dim; ++i) z0(i) = r.normal();
    for (int i = 0; i < 32; ++i) {
      bee::VectorXd img(model_cfg.image_dim());
      for (int j = 0; j < img.size(); ++j) img(j) = r.uniform();
      images.push_back(img);
    }
  }

  static bee::Rng& rng() {
    static bee::Rng r(42);
    return r;
  }
};

Fixture& fixture() {
  static Fixture f;
  return f;
}

void bm_plan_explore(benchmark::State& state, bool parallel) {
  Fixture& f = fixture();
  bee::PlanConfig cfg;
  cfg.num_samples = 1000;
  cfg.horizon = 10;
  cfg.parallel = parallel;
  const bee::BatchDynamics dyn = bee::dynamics_from_world_model(f.wm);
  const bee::TrajectoryScorer scorer =
      bee::make_bee_scorer(f.ensemble, bee::RewardMode::max_score);
  bee::Rng rng(123);
  for (auto _ : state) {
    auto result = bee::plan_explore(f.z0, dyn, scorer, cfg, rng);
    benchmark::DoNotOptimize(result.actions.data());
  }
}

void bm_vae_update(benchmark::State& state, bool parallel) {
  Fixture& f = fixture();
  bee::WorldModelConfig cfg = f.model_cfg;
  cfg.parallel = parallel;
  bee::Rng init(1);
  bee::WorldModel wm(cfg, init);
  bee::Rng rng(5);
  for (auto _ : state) {
    auto stats = wm.vae_update(f.images, rng);
    benchmark::DoNotOptimize(stats.loss);
  }
}

}  // namespace

BENCHMARK_CAPTURE(bm_plan_explore, serial, false)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(bm_plan_explore, openmp, true)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(bm_vae_update, serial, false)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(bm_vae_update, openmp, true)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();

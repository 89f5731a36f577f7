#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "bee/core/augment.hpp"
#include "bee/core/gradcheck.hpp"
#include "bee/model/world_model.hpp"
#include "bee/sim/tabletop.hpp"

using namespace bee;

namespace {

WorldModelConfig tiny_config() {
  WorldModelConfig cfg;
  cfg.image_hw = 4;
  cfg.latent_dim = 3;
  cfg.enc_hidden = {8};
  cfg.dec_hidden = {8};
  cfg.batch_size = 4;
  return cfg;
}

// hand-set the gated cell + affine head to the exact map z' = z + W a:
// zero gates evaluate to 1/2, so with Uc = 0 and candidate weights
// [2I | 2W] the update is h' = z/2 + (2z + 2Wa)/2 ... using Wc = [I | 2W]
// gives h' = z/2 + (z + 2Wa)/2 = z + Wa.
void set_linear_dynamics(LatentDynamics& dyn, const MatrixXd& w) {
  const int lz = dyn.latent_dim();
  const int ad = dyn.action_dim();
  for (ParamTensor* p : dyn.cell().parameters()) p->value.setZero();
  MatrixXd wc = MatrixXd::Zero(lz, lz + ad);
  wc.leftCols(lz) = MatrixXd::Identity(lz, lz);
  wc.rightCols(ad) = 2.0 * w;
  dyn.cell().param("wc").value = wc;
  REQUIRE(dyn.head().num_layers() == 1);
  dyn.head().layers()[0].w.value = MatrixXd::Identity(lz, lz);
  dyn.head().layers()[0].b.value.setZero();
}

}  // namespace

TEST_CASE("encode: deterministic mode is pure and finite on a zero image") {
  Rng rng(1);
  WorldModel wm(tiny_config(), rng);
  const VectorXd img = VectorXd::Zero(16);
  const VectorXd a = wm.encode_mean(img);
  const VectorXd b = wm.encode_mean(img);
  CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
  CHECK(a.allFinite());
  Rng sample_rng(2);
  const auto enc = wm.encode(img, sample_rng);
  CHECK(enc.mean.allFinite());
  CHECK(enc.logvar.allFinite());
  CHECK(enc.sample.allFinite());
}

TEST_CASE("encode: toy fit separates a 2-image dataset in latent space") {
  WorldModelConfig cfg = tiny_config();
  cfg.latent_dim = 4;
  Rng rng(3);
  WorldModel wm(cfg, rng);
  VectorXd img_a = VectorXd::Zero(16), img_b = VectorXd::Zero(16);
  for (int i = 0; i < 8; ++i) img_a(i) = 1.0;
  for (int i = 8; i < 16; ++i) img_b(i) = 1.0;
  Rng train_rng(4);
  for (int u = 0; u < 150; ++u) wm.vae_update({img_a, img_b}, train_rng);
  const double gap = (wm.encode_mean(img_a) - wm.encode_mean(img_b)).norm();
  CHECK(gap >= 1e-2);
}

TEST_CASE("vae loss: posterior forced to N(0, I) has exactly zero KL") {
  WorldModelConfig cfg = tiny_config();
  Rng rng(5);
  WorldModel wm(cfg, rng);
  // final encoder layer outputs all zeros -> mean = 0, logvar = 0
  auto& last = wm.encoder().layers().back();
  last.w.value.setZero();
  last.b.value.setZero();
  Rng batch_rng(6);
  VectorXd img(16);
  for (int i = 0; i < 16; ++i) img(i) = batch_rng.uniform();
  const VaeStats stats = wm.vae_loss_and_grads({img}, batch_rng);
  CHECK(stats.kl == 0.0);
}

TEST_CASE("vae loss: beta = 0 reduces to pure reconstruction error") {
  WorldModelConfig cfg = tiny_config();
  cfg.beta = 0.0;
  Rng rng(7);
  WorldModel wm(cfg, rng);
  Rng batch_rng(8);
  VectorXd img(16);
  for (int i = 0; i < 16; ++i) img(i) = batch_rng.uniform();
  const VaeStats stats = wm.vae_loss_and_grads({img}, batch_rng);
  CHECK(stats.loss == stats.recon);
}

TEST_CASE("vae loss: closed-form KL matches 0.5*mu^2 for unit-variance posteriors") {
  WorldModelConfig cfg = tiny_config();
  cfg.latent_dim = 1;
  Rng rng(9);
  WorldModel wm(cfg, rng);
  auto& last = wm.encoder().layers().back();
  last.w.value.setZero();
  last.b.value.setZero();
  last.b.value(0, 0) = 2.0;  // mean = 2, logvar = 0
  Rng batch_rng(10);
  const VaeStats stats = wm.vae_loss_and_grads({VectorXd::Zero(16)}, batch_rng);
  CHECK(stats.kl == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("vae loss: closed-form KL matches a Monte-Carlo estimate within 2%") {
  Rng rng(11);
  for (int trial = 0; trial < 3; ++trial) {
    const int dim = 3;
    VectorXd mean(dim), logvar(dim);
    for (int i = 0; i < dim; ++i) {
      mean(i) = rng.normal();
      logvar(i) = 0.5 * rng.normal();
    }
    double closed = 0.0;
    for (int i = 0; i < dim; ++i)
      closed += 0.5 * (std::exp(logvar(i)) + mean(i) * mean(i) - 1.0 - logvar(i));

    // MC estimate of E_q[log q(z) - log p(z)]
    const int n = 200000;
    double acc = 0.0;
    for (int s = 0; s < n; ++s) {
      double log_q = 0.0, log_p = 0.0;
      for (int i = 0; i < dim; ++i) {
        const double sd = std::exp(0.5 * logvar(i));
        const double z = mean(i) + sd * rng.normal();
        log_q += -0.5 * std::log(2.0 * M_PI) - 0.5 * logvar(i) -
                 0.5 * (z - mean(i)) * (z - mean(i)) / (sd * sd);
        log_p += -0.5 * std::log(2.0 * M_PI) - 0.5 * z * z;
      }
      acc += log_q - log_p;
    }
    const double mc = acc / n;
    CHECK(std::abs(mc - closed) / std::max(0.05, std::abs(closed)) < 0.02);
  }
}

TEST_CASE("vae loss: gradients match finite differences") {
  WorldModelConfig cfg = tiny_config();
  Rng rng(12);
  WorldModel wm(cfg, rng);
  Rng data_rng(13);
  std::vector<VectorXd> batch;
  for (int b = 0; b < 2; ++b) {
    VectorXd img(16);
    for (int i = 0; i < 16; ++i) img(i) = data_rng.uniform();
    batch.push_back(img);
  }

  Rng grad_rng(14);
  wm.vae_loss_and_grads(batch, grad_rng);

  // pure re-evaluation with the identical eps draws (same seed, same order)
  auto loss = [&]() {
    Rng eps_rng(14);
    const int lz = cfg.latent_dim;
    std::vector<VectorXd> eps(batch.size());
    for (auto& e : eps) {
      e = VectorXd(lz);
      for (int j = 0; j < lz; ++j) e(j) = eps_rng.normal();
    }
    double total = 0.0;
    for (size_t i = 0; i < batch.size(); ++i) {
      const VectorXd out = wm.encoder().forward_pure(batch[i]);
      const VectorXd mean = out.head(lz);
      double kl = 0.0;
      VectorXd z(lz);
      for (int j = 0; j < lz; ++j) {
        const double lv = clamp_logvar(out(lz + j));
        z(j) = mean(j) + std::exp(0.5 * lv) * eps[i](j);
        kl += 0.5 * (std::exp(lv) + mean(j) * mean(j) - 1.0 - lv);
      }
      const double recon = (wm.decoder().forward_pure(z) - batch[i]).squaredNorm();
      total += recon + cfg.beta * kl;
    }
    return total / batch.size();
  };

  std::vector<ParamTensor*> params = wm.encoder().parameters();
  for (auto* p : wm.decoder().parameters()) params.push_back(p);
  const auto report = gradcheck(params, loss, 1e-5);
  CHECK(report.max_rel_err < 1e-3);
}

TEST_CASE("rollout: empty action sequence predicts nothing") {
  Rng rng(15);
  WorldModel wm(tiny_config(), rng);
  const VectorXd z0 = VectorXd::Ones(3);
  CHECK(wm.rollout(z0, {}).empty());
}

TEST_CASE("rollout: H=3 equals three chained H=1 rollouts") {
  Rng rng(16);
  WorldModel wm(tiny_config(), rng);
  VectorXd z0(3);
  z0 << 0.3, -0.2, 0.7;
  const std::vector<Action> actions{{0.5, -0.5}, {-1.0, 0.2}, {0.1, 0.9}};
  const auto full = wm.rollout(z0, actions);
  VectorXd z = z0;
  for (int k = 0; k < 3; ++k) {
    const auto one = wm.rollout(z, std::span<const Action>(&actions[k], 1));
    z = one[0];
    CHECK((full[k] - z).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("rollout: hand-set linear dynamics matches the closed-form sum") {
  WorldModelConfig cfg = tiny_config();
  cfg.latent_dim = 2;
  Rng rng(17);
  WorldModel wm(cfg, rng);
  MatrixXd w(2, 2);
  w << 0.3, -0.1, 0.2, 0.5;
  set_linear_dynamics(wm.dynamics(), w);

  VectorXd z0(2);
  z0 << 0.4, -0.6;
  const std::vector<Action> actions{{1.0, 0.0}, {-0.5, 0.25}, {0.0, -1.0}};
  const auto predicted = wm.rollout(z0, actions);
  VectorXd expect = z0;
  for (size_t k = 0; k < actions.size(); ++k) {
    VectorXd a(2);
    a << actions[k].dx, actions[k].dy;
    expect += w * a;
    CHECK((predicted[k] - expect).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("dynamics loss: exact predictions give zero loss") {
  WorldModelConfig cfg = tiny_config();
  cfg.latent_dim = 2;
  Rng rng(18);
  WorldModel wm(cfg, rng);
  MatrixXd w(2, 2);
  w << 0.1, 0.0, 0.0, 0.1;
  set_linear_dynamics(wm.dynamics(), w);
  VectorXd z0(2);
  z0 << 0.5, -0.5;
  const std::vector<Action> actions{{1.0, -1.0}};
  const VectorXd z1 = wm.dynamics_step(z0, actions[0]);
  GatedCell::Grads cg = wm.dynamics().cell().make_grads();
  DenseGrads hg = wm.dynamics().head().make_grads();
  const double loss =
      wm.dynamics().sequence_loss_and_grads({z0, z1}, actions, cg, hg);
  CHECK(loss == 0.0);
}

TEST_CASE("dynamics loss: 1-dim hand case gives 0.25") {
  WorldModelConfig cfg = tiny_config();
  cfg.latent_dim = 1;
  Rng rng(19);
  WorldModel wm(cfg, rng);
  set_linear_dynamics(wm.dynamics(), MatrixXd::Zero(1, 2));
  // prediction is z0 = 0.5 (zero action map); target 1.0 -> loss 0.25
  VectorXd z0(1), z1(1);
  z0 << 0.5;
  z1 << 1.0;
  GatedCell::Grads cg = wm.dynamics().cell().make_grads();
  DenseGrads hg = wm.dynamics().head().make_grads();
  const double loss = wm.dynamics().sequence_loss_and_grads(
      {z0, z1}, std::vector<Action>{{0.0, 0.0}}, cg, hg);
  CHECK(loss == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("dynamics loss: gradients match finite differences through BPTT") {
  WorldModelConfig cfg = tiny_config();
  cfg.latent_dim = 2;
  Rng rng(20);
  WorldModel wm(cfg, rng);
  Rng data_rng(21);
  std::vector<VectorXd> latents;
  for (int t = 0; t < 4; ++t) {
    VectorXd z(2);
    z << data_rng.normal(), data_rng.normal();
    latents.push_back(z);
  }
  const std::vector<Action> actions{{0.3, -0.3}, {0.8, 0.1}, {-0.4, 0.5}};

  LatentDynamics& dyn = wm.dynamics();
  GatedCell::Grads cg = dyn.cell().make_grads();
  DenseGrads hg = dyn.head().make_grads();
  dyn.sequence_loss_and_grads(latents, actions, cg, hg);
  dyn.cell().accumulate(cg);
  dyn.head().accumulate(hg);

  auto loss = [&]() {
    GatedCell::Grads c2 = dyn.cell().make_grads();
    DenseGrads h2 = dyn.head().make_grads();
    return dyn.sequence_loss_and_grads(latents, actions, c2, h2);
  };
  const auto report = gradcheck(dyn.parameters(), loss, 1e-5);
  CHECK(report.max_rel_err < 1e-3);
}

TEST_CASE("dynamics training: loss decreases on a fixed buffer") {
  WorldModelConfig cfg;
  cfg.image_hw = 8;
  cfg.latent_dim = 6;
  cfg.enc_hidden = {24};
  cfg.dec_hidden = {24};
  cfg.batch_size = 8;
  Rng rng(22);
  WorldModel wm(cfg, rng);

  LayoutSpec layout = LayoutSpec::preset("blocks");
  layout.horizon = 10;
  TabletopEnv env(layout, 8);
  ReplayBuffer buffer;
  Rng act_rng(23);
  for (int e = 0; e < 20; ++e) {
    Episode ep;
    ep.obs.push_back(env.reset());
    for (int t = 0; t < 10; ++t) {
      const Action a{act_rng.uniform(-1, 1), act_rng.uniform(-1, 1)};
      ep.obs.push_back(env.step(a));
      ep.actions.push_back(a);
    }
    buffer.append(std::move(ep));
  }

  Rng train_rng(24);
  // settle the encoder first so dynamics targets are stable
  for (int u = 0; u < 50; ++u) {
    std::vector<VectorXd> batch;
    for (int i = 0; i < 8; ++i) {
      const auto& ep = buffer.episode(train_rng.uniform_int(20));
      batch.push_back(ep.obs[train_rng.uniform_int(11)].image);
    }
    wm.vae_update(batch, train_rng);
  }
  std::vector<double> losses;
  for (int u = 0; u < 200; ++u) {
    std::vector<std::vector<VectorXd>> obs_seg(cfg.batch_size);
    std::vector<std::vector<Action>> act_seg(cfg.batch_size);
    for (int i = 0; i < cfg.batch_size; ++i) {
      const auto& ep = buffer.episode(train_rng.uniform_int(20));
      const int t = train_rng.uniform_int(10 - 2 + 1);
      for (int k = 0; k <= 2; ++k) obs_seg[i].push_back(ep.obs[t + k].image);
      for (int k = 0; k < 2; ++k) act_seg[i].push_back(ep.actions[t + k]);
    }
    losses.push_back(wm.dynamics_update(obs_seg, act_seg, train_rng));
  }
  auto smooth = [&](int lo) {
    double s = 0.0;
    for (int i = lo; i < lo + 10; ++i) s += losses[i];
    return s / 10.0;
  };
  CHECK(smooth(190) < smooth(0));
  CHECK(smooth(190) < 0.8 * smooth(0));
}

TEST_CASE("train step: sampling respects the recent-episode window") {
  ReplayBuffer buffer;
  for (int e = 0; e < 600; ++e) {
    Episode ep;
    ep.obs.resize(2);
    ep.actions.resize(1);
    buffer.append(std::move(ep));
  }
  Rng rng(25);
  size_t min_seen = 600;
  for (int draw = 0; draw < 1000; ++draw)
    min_seen = std::min(min_seen, sample_recent_episode_index(buffer, 500, rng));
  CHECK(min_seen >= 100);
}

TEST_CASE("horizon schedule: curriculum breakpoints") {
  const HorizonSchedule schedule;
  CHECK(schedule.horizon_for(0) == 2);
  CHECK(schedule.horizon_for(40) == 2);
  CHECK(schedule.horizon_for(49) == 2);
  CHECK(schedule.horizon_for(50) == 4);
  CHECK(schedule.horizon_for(149) == 4);
  CHECK(schedule.horizon_for(200) == 8);
  CHECK(schedule.horizon_for(299) == 8);
  CHECK(schedule.horizon_for(300) == 10);
  CHECK(schedule.horizon_for(5000) == 10);
}

TEST_CASE("crop augmentation: output is a contiguous window of the padded image") {
  VectorXd img(16);
  for (int i = 0; i < 16; ++i) img(i) = i + 1.0;
  const int pad = 2;
  for (int dy = 0; dy <= 2 * pad; ++dy) {
    for (int dx = 0; dx <= 2 * pad; ++dx) {
      const VectorXd out = crop_at(img, 4, 4, pad, dy, dx);
      CHECK(out.size() == 16);
      for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x) {
          const int sy = y + dy - pad;
          const int sx = x + dx - pad;
          const double expect =
              (sy >= 0 && sy < 4 && sx >= 0 && sx < 4) ? img(sy * 4 + sx) : 0.0;
          CHECK(out(y * 4 + x) == expect);
        }
    }
  }
  Rng rng(26);
  CHECK(random_crop(img, 4, 4, pad, rng).size() == 16);
}

TEST_CASE("isolation: dynamics updates never touch encoder or decoder weights") {
  WorldModelConfig cfg = tiny_config();
  Rng rng(27);
  WorldModel wm(cfg, rng);
  Rng data_rng(28);
  std::vector<std::vector<VectorXd>> obs_seg(2);
  std::vector<std::vector<Action>> act_seg(2);
  for (int i = 0; i < 2; ++i) {
    for (int t = 0; t < 3; ++t) {
      VectorXd img(16);
      for (int j = 0; j < 16; ++j) img(j) = data_rng.uniform();
      obs_seg[i].push_back(img);
    }
    act_seg[i] = {{0.1, 0.2}, {-0.3, 0.4}};
  }
  const std::uint64_t before = param_hash(wm.vae_parameters());
  const std::uint64_t dyn_before =
      param_hash(std::as_const(wm).dynamics().parameters());
  wm.dynamics_update(obs_seg, act_seg, data_rng);
  CHECK(param_hash(wm.vae_parameters()) == before);
  CHECK(param_hash(std::as_const(wm).dynamics().parameters()) != dyn_before);
}

TEST_CASE("checkpoint: world model save/load round trip") {
  WorldModelConfig cfg = tiny_config();
  Rng rng(29);
  WorldModel wm(cfg, rng);
  wm.save("wm_test.ckpt", 1234);
  Rng rng2(30);
  WorldModel other(cfg, rng2);
  other.load("wm_test.ckpt");
  CHECK(param_hash(std::as_const(wm).parameters()) ==
        param_hash(std::as_const(other).parameters()));
  std::remove("wm_test.ckpt");
}

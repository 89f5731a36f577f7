#include "bee/harness/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace bee {

namespace fs = std::filesystem;

namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

enum class Method { bee, disagreement, smm, random };

Method method_from_string(const std::string& s) {
  if (s == "bee") return Method::bee;
  if (s == "disagreement") return Method::disagreement;
  if (s == "smm") return Method::smm;
  if (s == "random") return Method::random;
  throw std::invalid_argument("unknown method: " + s);
}

}  // namespace

LayoutSpec ExperimentConfig::make_layout() const {
  if (layout_json) return LayoutSpec::from_json(*layout_json);
  return LayoutSpec::preset(layout_name);
}

void ExperimentConfig::validate() const {
  method_from_string(method);
  if (episodes <= 0) throw std::invalid_argument("config: episodes must be > 0");
  if (warmup_episodes < 0)
    throw std::invalid_argument("config: warmup_episodes must be >= 0");
  if (num_examples < 1)
    throw std::invalid_argument("config: num_examples must be >= 1");
  if (image_hw < 4) throw std::invalid_argument("config: image_hw too small");
  if (updates_per_episode < 0)
    throw std::invalid_argument("config: updates_per_episode must be >= 0");
  make_layout();  // throws on malformed layouts
  plan.validate();
}

nlohmann::json ExperimentConfig::to_json() const {
  nlohmann::json j;
  if (layout_json)
    j["layout"] = *layout_json;
  else
    j["layout"] = layout_name;
  j["method"] = method;
  j["episodes"] = episodes;
  j["warmup_episodes"] = warmup_episodes;
  j["num_examples"] = num_examples;
  j["image_hw"] = image_hw;
  j["seed"] = seed;
  j["updates_per_episode"] = updates_per_episode;
  j["reward_mode"] = to_string(reward_mode);
  j["model"] = {{"latent_dim", model.latent_dim},
                {"enc_hidden", model.enc_hidden},
                {"dec_hidden", model.dec_hidden},
                {"dyn_head_hidden", model.dyn_head_hidden},
                {"beta", model.beta},
                {"lr", model.lr},
                {"batch_size", model.batch_size},
                {"crop_pad", model.crop_pad},
                {"recent_window", model.recent_window}};
  j["ensemble"] = {{"members", ensemble.members},
                   {"hidden", ensemble.hidden},
                   {"lr", ensemble.lr},
                   {"mixup_alpha", ensemble.mixup_alpha},
                   {"positives", ensemble.positives},
                   {"negatives", ensemble.negatives},
                   {"power_iters", ensemble.power_iters},
                   {"crop_pad", ensemble.crop_pad},
                   {"updates_per_episode", ensemble.updates_per_episode}};
  j["disagreement"] = {{"heads", disagreement.heads},
                       {"head_hidden", disagreement.head_hidden},
                       {"lr", disagreement.lr},
                       {"batch_size", disagreement.batch_size}};
  j["smm"] = {{"inner_dim", smm.inner_dim},
              {"hidden", smm.hidden},
              {"beta", smm.beta},
              {"lr", smm.lr},
              {"batch_size", smm.batch_size}};
  j["plan"] = {{"num_samples", plan.num_samples},
               {"horizon", plan.horizon},
               {"cem_iterations", plan.cem_iterations},
               {"elite_count", plan.elite_count},
               {"top_k_choice", plan.top_k_choice},
               {"epsilon_random", plan.epsilon_random},
               {"action_std", plan.action_std},
               {"chunk_size", plan.chunk_size},
               {"parallel", plan.parallel}};
  return j;
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  if (j.contains("layout")) {
    if (j["layout"].is_string())
      c.layout_name = j["layout"].get<std::string>();
    else
      c.layout_json = j["layout"];
  }
  c.method = j.value("method", c.method);
  c.episodes = j.value("episodes", c.episodes);
  c.warmup_episodes = j.value("warmup_episodes", c.warmup_episodes);
  c.num_examples = j.value("num_examples", c.num_examples);
  c.image_hw = j.value("image_hw", c.image_hw);
  c.seed = j.value("seed", c.seed);
  c.updates_per_episode = j.value("updates_per_episode", c.updates_per_episode);
  if (j.contains("reward_mode"))
    c.reward_mode = reward_mode_from_string(j["reward_mode"].get<std::string>());
  if (j.contains("model")) {
    const auto& m = j["model"];
    c.model.latent_dim = m.value("latent_dim", c.model.latent_dim);
    c.model.enc_hidden = m.value("enc_hidden", c.model.enc_hidden);
    c.model.dec_hidden = m.value("dec_hidden", c.model.dec_hidden);
    c.model.dyn_head_hidden = m.value("dyn_head_hidden", c.model.dyn_head_hidden);
    c.model.beta = m.value("beta", c.model.beta);
    c.model.lr = m.value("lr", c.model.lr);
    c.model.batch_size = m.value("batch_size", c.model.batch_size);
    c.model.crop_pad = m.value("crop_pad", c.model.crop_pad);
    c.model.recent_window = m.value("recent_window", c.model.recent_window);
  }
  if (j.contains("ensemble")) {
    const auto& e = j["ensemble"];
    c.ensemble.members = e.value("members", c.ensemble.members);
    c.ensemble.hidden = e.value("hidden", c.ensemble.hidden);
    c.ensemble.lr = e.value("lr", c.ensemble.lr);
    c.ensemble.mixup_alpha = e.value("mixup_alpha", c.ensemble.mixup_alpha);
    c.ensemble.positives = e.value("positives", c.ensemble.positives);
    c.ensemble.negatives = e.value("negatives", c.ensemble.negatives);
    c.ensemble.power_iters = e.value("power_iters", c.ensemble.power_iters);
    c.ensemble.crop_pad = e.value("crop_pad", c.ensemble.crop_pad);
    c.ensemble.updates_per_episode =
        e.value("updates_per_episode", c.ensemble.updates_per_episode);
  }
  if (j.contains("disagreement")) {
    const auto& d = j["disagreement"];
    c.disagreement.heads = d.value("heads", c.disagreement.heads);
    c.disagreement.head_hidden = d.value("head_hidden", c.disagreement.head_hidden);
    c.disagreement.lr = d.value("lr", c.disagreement.lr);
    c.disagreement.batch_size = d.value("batch_size", c.disagreement.batch_size);
  }
  if (j.contains("smm")) {
    const auto& s = j["smm"];
    c.smm.inner_dim = s.value("inner_dim", c.smm.inner_dim);
    c.smm.hidden = s.value("hidden", c.smm.hidden);
    c.smm.beta = s.value("beta", c.smm.beta);
    c.smm.lr = s.value("lr", c.smm.lr);
    c.smm.batch_size = s.value("batch_size", c.smm.batch_size);
  }
  if (j.contains("plan")) {
    const auto& p = j["plan"];
    c.plan.num_samples = p.value("num_samples", c.plan.num_samples);
    c.plan.horizon = p.value("horizon", c.plan.horizon);
    c.plan.cem_iterations = p.value("cem_iterations", c.plan.cem_iterations);
    c.plan.elite_count = p.value("elite_count", c.plan.elite_count);
    c.plan.top_k_choice = p.value("top_k_choice", c.plan.top_k_choice);
    c.plan.epsilon_random = p.value("epsilon_random", c.plan.epsilon_random);
    c.plan.action_std = p.value("action_std", c.plan.action_std);
    c.plan.chunk_size = p.value("chunk_size", c.plan.chunk_size);
    c.plan.parallel = p.value("parallel", c.plan.parallel);
  }
  return c;
}

std::uint64_t ExperimentConfig::hash() const { return fnv1a(to_json().dump()); }

Episode random_episode(Env& env, Rng& rng) {
  Episode episode;
  Observation obs = env.reset();
  episode.obs.push_back(obs);
  for (int t = 0; t < env.horizon(); ++t) {
    const Action a = random_policy(rng);
    obs = env.step(a);
    episode.actions.push_back(a);
    episode.obs.push_back(obs);
  }
  return episode;
}

RunResult run_batch_exploration(const ExperimentConfig& config,
                                const std::string& out_dir, Env* env_override) {
  config.validate();
  const Method method = method_from_string(config.method);
  fs::create_directories(out_dir);

  LayoutSpec layout = config.make_layout();
  TabletopEnv own_env(layout, config.image_hw);
  Env& env = env_override ? *env_override : static_cast<Env&>(own_env);

  Rng rng_examples = Rng::stream(config.seed, 1);
  Rng rng_init = Rng::stream(config.seed, 2);
  Rng rng_train = Rng::stream(config.seed, 3);
  Rng rng_plan = Rng::stream(config.seed, 4);
  Rng rng_warmup = Rng::stream(config.seed, 5);
  Rng rng_reward_init = Rng::stream(config.seed, 6);

  // the procedural stand-in for the human supervision
  const std::vector<Observation> examples =
      generate_relevant_examples(own_env, config.num_examples, rng_examples);
  std::vector<VectorXd> example_images;
  example_images.reserve(examples.size());
  for (const auto& e : examples) example_images.push_back(e.image);
  RelevantSet relevant{example_images};

  WorldModelConfig model_cfg = config.model;
  model_cfg.image_hw = config.image_hw;
  model_cfg.action_dim = 2;
  WorldModel wm(model_cfg, rng_init);

  std::optional<RelevanceEnsemble> ensemble;
  std::optional<DisagreementEnsemble> disagree;
  std::optional<SmmDensityPair> smm;
  switch (method) {
    case Method::bee:
      ensemble.emplace(config.ensemble, model_cfg.latent_dim, rng_reward_init);
      break;
    case Method::disagreement:
      disagree.emplace(config.disagreement, model_cfg.latent_dim, 2, rng_reward_init);
      break;
    case Method::smm:
      smm.emplace(config.smm, model_cfg.latent_dim, rng_reward_init);
      break;
    case Method::random:
      break;
  }

  PlanConfig plan_cfg = config.plan;
  plan_cfg.action_dim = 2;

  std::vector<std::string> object_names;
  for (const auto& o : layout.objects) object_names.push_back(o.name);
  MetricsLog metrics(object_names);

  ReplayBuffer buffer;
  RunResult result;
  result.config_hash = config.hash();

  const auto encode = [&wm](const VectorXd& image) { return wm.encode_mean(image); };

  for (int ep = 0; ep < config.episodes; ++ep) {
    Episode episode;
    EpisodeLog plan_log;
    const bool planned = method != Method::random && ep >= config.warmup_episodes;
    if (planned) {
      const BatchDynamics dyn = dynamics_from_world_model(wm);
      TrajectoryScorer scorer;
      switch (method) {
        case Method::bee:
          scorer = make_bee_scorer(*ensemble, config.reward_mode);
          break;
        case Method::disagreement:
          scorer = make_disagreement_scorer(*disagree);
          break;
        case Method::smm:
          scorer = make_smm_scorer(*smm);
          break;
        case Method::random:
          break;
      }
      episode = act_episode(env, encode, dyn, scorer, plan_cfg, rng_plan, &plan_log);
    } else {
      episode = random_episode(env, rng_warmup);
    }
    buffer.append(std::move(episode));
    const Episode& stored = buffer.episode(buffer.size() - 1);
    result.plan_calls += plan_log.plan_calls;

    double vae_loss = 0.0, kl = 0.0, dyn_loss = 0.0;
    try {
      for (int u = 0; u < config.updates_per_episode; ++u) {
        const TrainStepStats stats = wm.train_step(
            buffer, example_images, static_cast<int>(buffer.size()), rng_train);
        vae_loss += stats.vae_replay.loss;
        kl += stats.vae_replay.kl;
        dyn_loss += stats.dyn_loss;
        if (disagree)
          disagree->update_once(buffer, wm, stats.horizon, rng_train);
        if (smm) smm->update_once(buffer, example_images, wm, rng_train);
      }
      if (ensemble)
        for (int u = 0; u < config.ensemble.updates_per_episode; ++u)
          ensemble->train_members(buffer, relevant, wm, config.image_hw);
    } catch (const std::runtime_error& e) {
      const std::string diag = out_dir + "/diagnostic.ckpt";
      wm.save(diag, result.config_hash);
      throw std::runtime_error(std::string("run aborted: ") + e.what() +
                               " (diagnostic checkpoint: " + diag + ")");
    }
    if (config.updates_per_episode > 0) {
      vae_loss /= config.updates_per_episode;
      kl /= config.updates_per_episode;
      dyn_loss /= config.updates_per_episode;
    }

    const InteractionReport report = interaction_report(stored.obs, layout);
    EpisodeMetrics row;
    row.episode = ep;
    row.target_moved = report.target_moved;
    row.displacement = report.max_displacement;
    row.vae_loss = vae_loss;
    row.kl = kl;
    row.dyn_loss = dyn_loss;
    if (ensemble) {
      double sum = 0.0;
      for (const auto& obs : stored.obs)
        sum += ensemble->r_exp(wm.encode_mean(obs.image), config.reward_mode);
      row.mean_r_exp = sum / stored.obs.size();
    } else {
      row.mean_r_exp = std::nan("");
    }
    row.plan_top_score = plan_log.plan_top_scores.empty()
                             ? std::nan("")
                             : mean(plan_log.plan_top_scores);
    metrics.append(std::move(row));
  }

  result.dataset_path = out_dir + "/dataset.bin";
  DatasetHeader header;
  header.config_hash = result.config_hash;
  header.episodes = static_cast<std::uint32_t>(buffer.size());
  header.horizon = static_cast<std::uint32_t>(layout.horizon);
  header.image_h = static_cast<std::uint32_t>(config.image_hw);
  header.image_w = static_cast<std::uint32_t>(config.image_hw);
  save_dataset(result.dataset_path, buffer.episodes(), header);

  result.metrics_path = out_dir + "/metrics.csv";
  metrics.write_csv(result.metrics_path, result.config_hash);

  wm.save(out_dir + "/world_model.ckpt", result.config_hash);
  if (ensemble) ensemble->save(out_dir + "/ensemble.ckpt", result.config_hash);

  std::ofstream cfg_out(out_dir + "/config.json");
  cfg_out << config.to_json().dump(2) << "\n";

  result.metrics = std::move(metrics);
  return result;
}

DownstreamTask make_downstream_task(const std::string& name) {
  DownstreamTask task;
  task.name = name;
  const MetricThresholds thresholds;
  if (name == "open_drawer") {
    task.layout = LayoutSpec::preset("drawer");
    SimState goal;
    TabletopEnv env(task.layout);
    goal = env.initial_state();
    const ObjectSpec& drawer = task.layout.objects[0];
    goal.objects[0].extension = 0.9 * drawer.max_extension;
    goal.gripper = handle_position(drawer, goal.objects[0]);
    task.goal_state = goal;
    task.success = [t = thresholds.drawer](const SimState& final_state,
                                           const SimState& initial_state) {
      return final_state.objects[0].extension - initial_state.objects[0].extension >= t;
    };
  } else if (name == "push_block") {
    task.layout = LayoutSpec::preset("blocks");
    TabletopEnv env(task.layout);
    SimState goal = env.initial_state();
    goal.objects[0].position += Vector2d(-0.12, 0.0);
    goal.gripper = goal.objects[0].position + Vector2d(0.10, 0.0);
    task.goal_state = goal;
    task.success = [t = thresholds.block](const SimState& final_state,
                                          const SimState& initial_state) {
      return (final_state.objects[0].position - initial_state.objects[0].position)
                 .norm() >= t;
    };
  } else {
    throw std::invalid_argument("unknown downstream task: " + name);
  }
  return task;
}

double run_downstream_eval(const Dataset& dataset, const DownstreamTask& task,
                           int trials, const DownstreamConfig& config,
                           std::uint64_t seed, const GoalPlanner& planner_override) {
  if (dataset.episodes.empty())
    throw std::invalid_argument("downstream eval: empty dataset");
  if (trials <= 0) throw std::invalid_argument("downstream eval: trials must be > 0");

  WorldModelConfig model_cfg = config.model;
  model_cfg.image_hw = static_cast<int>(dataset.header.image_h);
  model_cfg.action_dim = 2;
  model_cfg.recent_window = static_cast<int>(dataset.episodes.size());

  Rng rng_init = Rng::stream(seed, 11);
  Rng rng_train = Rng::stream(seed, 12);
  WorldModel wm(model_cfg, rng_init);

  ReplayBuffer buffer;
  for (const Episode& ep : dataset.episodes) buffer.append(ep);

  // offline training with the horizon curriculum applied over the update
  // budget (same breakpoints, scaled into a 0..400 pseudo-episode range)
  for (int u = 0; u < config.training_updates; ++u) {
    const int pseudo_episode =
        static_cast<int>((static_cast<std::int64_t>(u) * 400) / config.training_updates);
    wm.train_step(buffer, {}, pseudo_episode, rng_train);
  }

  TabletopEnv env(task.layout, model_cfg.image_hw);
  const VectorXd goal_image = env.render(task.goal_state);

  PlanConfig plan_cfg = config.plan;
  plan_cfg.action_dim = 2;
  const BatchDynamics dyn = dynamics_from_world_model(wm);
  const auto decode_batch = [&wm](const MatrixXd& z) { return wm.decode_batch(z); };

  const int T = task.layout.horizon;
  if (T % plan_cfg.horizon != 0)
    throw std::invalid_argument("downstream eval: horizon mismatch");

  int successes = 0;
  for (int trial = 0; trial < trials; ++trial) {
    Rng rng = Rng::stream(seed, 1000 + static_cast<std::uint64_t>(trial));
    Observation obs = env.reset();
    const SimState initial = env.state();
    for (int seg = 0; seg < T / plan_cfg.horizon; ++seg) {
      const VectorXd z0 = wm.encode_mean(obs.image);
      VectorXd flat;
      if (planner_override) {
        flat = planner_override(z0, goal_image);
      } else {
        flat = plan_goal(z0, goal_image, dyn, decode_batch, plan_cfg, rng).actions;
      }
      for (const Action& a : to_actions(flat)) obs = env.step(a);
    }
    if (task.success(env.state(), initial)) ++successes;
  }
  return static_cast<double>(successes) / trials;
}

SweepSpec SweepSpec::parse(const std::string& spec,
                           const std::vector<std::uint64_t>& seeds) {
  SweepSpec out;
  out.seeds = seeds.empty() ? std::vector<std::uint64_t>{0} : seeds;
  const auto eq = spec.find('=');
  if (eq == std::string::npos)
    throw std::invalid_argument("sweep: expected '<kind>=<v1,v2,...>'");
  out.kind = spec.substr(0, eq);
  std::stringstream ss(spec.substr(eq + 1));
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    if (out.kind == "mode") {
      reward_mode_from_string(item);  // validates
      out.modes.push_back(item);
    } else if (out.kind == "latent") {
      out.latent_dims.push_back(std::stoi(item));
    } else {
      throw std::invalid_argument("sweep: unknown kind '" + out.kind + "'");
    }
  }
  if (out.modes.empty() && out.latent_dims.empty())
    throw std::invalid_argument("sweep: no values given");
  return out;
}

std::vector<std::string> SweepSpec::setting_names() const {
  std::vector<std::string> names;
  for (const auto& m : modes) names.push_back("mode_" + m);
  for (int d : latent_dims) names.push_back("latent_" + std::to_string(d));
  return names;
}

std::vector<std::string> run_ablation(const ExperimentConfig& base,
                                      const SweepSpec& sweep,
                                      const std::string& out_dir) {
  fs::create_directories(out_dir);
  std::vector<std::string> run_dirs;
  auto run_one = [&](const std::string& setting, const ExperimentConfig& cfg_in,
                     std::uint64_t seed) {
    ExperimentConfig cfg = cfg_in;
    cfg.seed = seed;
    const std::string dir = out_dir + "/" + setting + "_seed" + std::to_string(seed);
    run_batch_exploration(cfg, dir);
    run_dirs.push_back(dir);
  };
  for (const auto& mode : sweep.modes) {
    ExperimentConfig cfg = base;
    cfg.method = "bee";
    cfg.reward_mode = reward_mode_from_string(mode);
    for (std::uint64_t s : sweep.seeds) run_one("mode_" + mode, cfg, s);
  }
  for (int dim : sweep.latent_dims) {
    ExperimentConfig cfg = base;
    cfg.model.latent_dim = dim;
    for (std::uint64_t s : sweep.seeds)
      run_one("latent_" + std::to_string(dim), cfg, s);
  }
  const int window = std::min(100, base.episodes);
  write_ablation_report(run_dirs, out_dir + "/ablation_report.csv", window);
  return run_dirs;
}

namespace {

struct ParsedRun {
  std::string setting;
  std::string seed;
  std::vector<double> freq;
};

ParsedRun parse_run_dir(const std::string& dir, int window) {
  const std::string base = fs::path(dir).filename().string();
  const auto pos = base.rfind("_seed");
  ParsedRun run;
  run.setting = pos == std::string::npos ? base : base.substr(0, pos);
  run.seed = pos == std::string::npos ? "0" : base.substr(pos + 5);
  const MetricsLog log = MetricsLog::read_csv(dir + "/metrics.csv");
  run.freq = log.interaction_frequency(window);
  return run;
}

}  // namespace

void write_ablation_report(const std::vector<std::string>& run_dirs,
                           const std::string& out_csv, int window) {
  std::vector<ParsedRun> runs;
  for (const auto& dir : run_dirs) runs.push_back(parse_run_dir(dir, window));

  std::vector<std::string> settings;
  for (const auto& r : runs)
    if (std::find(settings.begin(), settings.end(), r.setting) == settings.end())
      settings.push_back(r.setting);

  std::ofstream out(out_csv);
  if (!out) throw std::runtime_error("cannot open " + out_csv);
  out << "kind,setting,index,value,stderr\n";
  for (const auto& setting : settings) {
    std::vector<const ParsedRun*> group;
    for (const auto& r : runs)
      if (r.setting == setting) group.push_back(&r);
    size_t n_windows = group.front()->freq.size();
    for (const auto* r : group) n_windows = std::min(n_windows, r->freq.size());
    for (size_t w = 0; w < n_windows; ++w) {
      std::vector<double> vals;
      for (const auto* r : group) vals.push_back(r->freq[w]);
      out << "curve," << setting << "," << w << "," << mean(vals) << ","
          << standard_error(vals) << "\n";
    }
    // stability diagnostic: variance of the per-window frequencies per run
    for (const auto* r : group) {
      out << "window_variance," << setting << "," << r->seed << ","
          << population_variance(r->freq) << ",0\n";
    }
  }
}

void write_report(const std::vector<std::string>& run_dirs,
                  const std::string& out_csv, int window) {
  std::ofstream out(out_csv);
  if (!out) throw std::runtime_error("cannot open " + out_csv);
  out << "run,window,frequency\n";
  for (const auto& dir : run_dirs) {
    const MetricsLog log = MetricsLog::read_csv(dir + "/metrics.csv");
    const auto freq = log.interaction_frequency(window);
    for (size_t w = 0; w < freq.size(); ++w)
      out << fs::path(dir).filename().string() << "," << w << "," << freq[w] << "\n";
  }
}

}  // namespace bee

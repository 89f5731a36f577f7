#include <cstdint>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "bee/harness/experiment.hpp"
#include "json.hpp"

namespace {

bee::ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  nlohmann::json j;
  in >> j;
  return bee::ExperimentConfig::from_json(j);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"weakly-supervised batch exploration"};
  app.require_subcommand(1);

  // explore
  auto* explore = app.add_subcommand("explore", "run one batch-exploration collection");
  std::string explore_config, explore_out = "run_out";
  std::uint64_t explore_seed = 0;
  bool seed_given = false;
  explore->add_option("--config", explore_config, "experiment config JSON")->required();
  explore->add_option("--out", explore_out, "output directory");
  explore->add_option("--seed", explore_seed, "seed override")
      ->each([&seed_given](const std::string&) { seed_given = true; });

  // eval
  auto* eval = app.add_subcommand("eval", "downstream goal-reaching evaluation");
  std::string eval_dataset, eval_task = "open_drawer";
  int eval_trials = 100;
  std::uint64_t eval_seed = 0;
  int eval_updates = 5000;
  eval->add_option("--dataset", eval_dataset, "collected dataset file")->required();
  eval->add_option("--task", eval_task, "task name (open_drawer, push_block)");
  eval->add_option("--trials", eval_trials, "number of evaluation trials");
  eval->add_option("--seed", eval_seed, "evaluation seed");
  eval->add_option("--updates", eval_updates, "offline training updates");

  // ablate
  auto* ablate = app.add_subcommand("ablate", "sweep reward modes or latent dims");
  std::string ablate_config, ablate_sweep, ablate_out = "ablation_out";
  std::vector<std::uint64_t> ablate_seeds{0, 1};
  ablate->add_option("--config", ablate_config, "base experiment config JSON")->required();
  ablate->add_option("--sweep", ablate_sweep,
                     "sweep spec, e.g. mode=max,mean_plus_variance,single or "
                     "latent=8,16,32,64")
      ->required();
  ablate->add_option("--seeds", ablate_seeds, "seeds to run per setting");
  ablate->add_option("--out", ablate_out, "output directory");

  // report
  auto* report = app.add_subcommand("report", "interaction-frequency report from runs");
  std::vector<std::string> report_runs;
  std::string report_out = "report.csv";
  int report_window = 100;
  report->add_option("--runs", report_runs, "run directories (with metrics.csv)")
      ->required();
  report->add_option("--out", report_out, "output CSV");
  report->add_option("--window", report_window, "episode window");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*explore) {
      bee::ExperimentConfig cfg = load_config(explore_config);
      if (seed_given) cfg.seed = explore_seed;
      const bee::RunResult result = bee::run_batch_exploration(cfg, explore_out);
      const auto freq_window = std::min(100, cfg.episodes);
      const auto freq = result.metrics.interaction_frequency(freq_window);
      std::cout << "dataset: " << result.dataset_path << "\n";
      std::cout << "metrics: " << result.metrics_path << "\n";
      std::cout << "target interaction frequency per " << freq_window
                << "-episode window:";
      for (double f : freq) std::cout << " " << f;
      std::cout << "\n";
    } else if (*eval) {
      const bee::Dataset dataset = bee::load_dataset(eval_dataset);
      const bee::DownstreamTask task = bee::make_downstream_task(eval_task);
      bee::DownstreamConfig cfg;
      cfg.training_updates = eval_updates;
      const double rate =
          bee::run_downstream_eval(dataset, task, eval_trials, cfg, eval_seed);
      std::cout << "task " << task.name << ": success rate " << rate << " over "
                << eval_trials << " trials\n";
    } else if (*ablate) {
      bee::ExperimentConfig cfg = load_config(ablate_config);
      const bee::SweepSpec sweep = bee::SweepSpec::parse(ablate_sweep, ablate_seeds);
      const auto dirs = bee::run_ablation(cfg, sweep, ablate_out);
      std::cout << "ran " << dirs.size() << " settings; report: " << ablate_out
                << "/ablation_report.csv\n";
    } else if (*report) {
      bee::write_report(report_runs, report_out, report_window);
      std::cout << "wrote " << report_out << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

#pragma once

#include <string>
#include <vector>

namespace bee {

struct EpisodeMetrics {
  int episode = 0;
  bool target_moved = false;
  std::vector<double> displacement;  // per object, layout order
  double mean_r_exp = 0.0;           // nan for methods without the ensemble
  double vae_loss = 0.0;
  double kl = 0.0;
  double dyn_loss = 0.0;
  double plan_top_score = 0.0;       // mean over the episode's plans
};

/// One row per completed episode; written to and re-read from CSV so
/// reports can be rebuilt from the metric files alone.
class MetricsLog {
 public:
  MetricsLog() = default;
  explicit MetricsLog(std::vector<std::string> object_names)
      : object_names_(std::move(object_names)) {}

  void append(EpisodeMetrics row);
  size_t size() const { return rows_.size(); }
  const std::vector<EpisodeMetrics>& rows() const { return rows_; }
  const std::vector<std::string>& object_names() const { return object_names_; }

  /// Fraction of target-moved episodes per non-overlapping trailing
  /// window (stride = window).
  std::vector<double> interaction_frequency(int window = 100) const;

  void write_csv(const std::string& path, std::uint64_t config_hash) const;
  static MetricsLog read_csv(const std::string& path);

 private:
  std::vector<std::string> object_names_;
  std::vector<EpisodeMetrics> rows_;
};

double mean(const std::vector<double>& xs);
double population_variance(const std::vector<double>& xs);
/// Standard error of the mean across runs (sample std / sqrt(n)).
double standard_error(const std::vector<double>& xs);

}  // namespace bee

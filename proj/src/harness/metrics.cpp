#include "bee/harness/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace bee {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(field);
  return out;
}

}  // namespace

void MetricsLog::append(EpisodeMetrics row) {
  if (!rows_.empty() && row.displacement.size() != rows_.front().displacement.size())
    throw std::invalid_argument("MetricsLog: inconsistent object count");
  rows_.push_back(std::move(row));
}

std::vector<double> MetricsLog::interaction_frequency(int window) const {
  if (window <= 0) throw std::invalid_argument("interaction_frequency: bad window");
  if (static_cast<int>(rows_.size()) < window)
    throw std::invalid_argument("interaction_frequency: fewer episodes than window");
  std::vector<double> out;
  for (size_t lo = 0; lo + window <= rows_.size(); lo += window) {
    int hits = 0;
    for (size_t i = lo; i < lo + window; ++i)
      if (rows_[i].target_moved) ++hits;
    out.push_back(static_cast<double>(hits) / window);
  }
  return out;
}

void MetricsLog::write_csv(const std::string& path, std::uint64_t config_hash) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("MetricsLog: cannot open " + path);
  out << "# config_hash=" << config_hash << "\n";
  out << "episode,target_moved";
  for (const auto& name : object_names_) out << ",disp_" << name;
  out << ",mean_r_exp,vae_loss,kl,dyn_loss,plan_top_score\n";
  for (const auto& r : rows_) {
    out << r.episode << "," << (r.target_moved ? 1 : 0);
    for (double d : r.displacement) out << "," << fmt(d);
    out << "," << fmt(r.mean_r_exp) << "," << fmt(r.vae_loss) << "," << fmt(r.kl)
        << "," << fmt(r.dyn_loss) << "," << fmt(r.plan_top_score) << "\n";
  }
}

MetricsLog MetricsLog::read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("MetricsLog: cannot open " + path);
  std::string line;
  std::getline(in, line);  // config hash comment
  if (line.rfind("# config_hash=", 0) != 0)
    throw std::runtime_error("MetricsLog: missing config hash header in " + path);
  std::getline(in, line);  // column header
  const auto header = split_csv_line(line);
  std::vector<std::string> names;
  for (const auto& col : header)
    if (col.rfind("disp_", 0) == 0) names.push_back(col.substr(5));
  MetricsLog log(names);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != 2 + names.size() + 5)
      throw std::runtime_error("MetricsLog: malformed row in " + path);
    EpisodeMetrics row;
    size_t f = 0;
    row.episode = std::stoi(fields[f++]);
    row.target_moved = fields[f++] == "1";
    for (size_t i = 0; i < names.size(); ++i)
      row.displacement.push_back(std::stod(fields[f++]));
    row.mean_r_exp = std::stod(fields[f++]);
    row.vae_loss = std::stod(fields[f++]);
    row.kl = std::stod(fields[f++]);
    row.dyn_loss = std::stod(fields[f++]);
    row.plan_top_score = std::stod(fields[f++]);
    log.append(std::move(row));
  }
  return log;
}

double mean(const std::vector<double>& xs) {
  if (xs.empty()) return 0.0;
  double s = 0.0;
  for (double x : xs) s += x;
  return s / xs.size();
}

double population_variance(const std::vector<double>& xs) {
  if (xs.empty()) return 0.0;
  const double m = mean(xs);
  double v = 0.0;
  for (double x : xs) v += (x - m) * (x - m);
  return v / xs.size();
}

double standard_error(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean(xs);
  double v = 0.0;
  for (double x : xs) v += (x - m) * (x - m);
  v /= (xs.size() - 1);
  return std::sqrt(v / xs.size());
}

}  // namespace bee

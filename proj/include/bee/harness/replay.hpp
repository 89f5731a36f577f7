#pragma once

#include <utility>
#include <vector>

#include "bee/core/rng.hpp"
#include "bee/sim/tabletop.hpp"

namespace bee {

/// One fixed-horizon rollout: T+1 observations and T actions.
struct Episode {
  std::vector<Observation> obs;
  std::vector<Action> actions;

  int num_transitions() const { return static_cast<int>(actions.size()); }
};

/// Append-only episode store. Batch exploration only ever grows the
/// dataset; training draws from a trailing window of recent episodes.
class ReplayBuffer {
 public:
  void append(Episode episode) { episodes_.push_back(std::move(episode)); }

  size_t size() const { return episodes_.size(); }
  bool empty() const { return episodes_.empty(); }
  const Episode& episode(size_t i) const { return episodes_.at(i); }
  const std::vector<Episode>& episodes() const { return episodes_; }

  size_t total_transitions() const {
    size_t n = 0;
    for (const auto& e : episodes_) n += e.actions.size();
    return n;
  }

  /// Index range [lo, hi) of the most recent `recent` episodes.
  std::pair<size_t, size_t> recent_window(size_t recent) const {
    const size_t hi = episodes_.size();
    const size_t lo = hi > recent ? hi - recent : 0;
    return {lo, hi};
  }

 private:
  std::vector<Episode> episodes_;
};

/// Uniform episode index over the trailing window; shared by every training
/// path so the recency rule lives in one place.
inline size_t sample_recent_episode_index(const ReplayBuffer& buffer,
                                          size_t recent, Rng& rng) {
  const auto [lo, hi] = buffer.recent_window(recent);
  return lo + static_cast<size_t>(rng.uniform_int(static_cast<int>(hi - lo)));
}

}  // namespace bee

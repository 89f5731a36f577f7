#pragma once

#include <string>
#include <vector>

#include "bee/harness/replay.hpp"

namespace bee {

struct DatasetHeader {
  std::uint32_t version = 1;
  std::uint64_t config_hash = 0;
  std::uint32_t episodes = 0;
  std::uint32_t horizon = 0;      // transitions per episode
  std::uint32_t image_h = 0;
  std::uint32_t image_w = 0;
  std::uint32_t action_dim = 2;
};

/// Collected-dataset persistence. Layout: magic "BEED", the header fields
/// as little-endian integers, then per episode (T+1) frames of h*w bytes
/// (pixel = round(255 * value); rendering quantizes to the same grid, so
/// the round trip is lossless) followed by T little-endian float64 actions.
void save_dataset(const std::string& path, const std::vector<Episode>& episodes,
                  const DatasetHeader& header);

struct Dataset {
  DatasetHeader header;
  std::vector<Episode> episodes;  // truth fields are empty: images only
};

/// Throws std::runtime_error with the failing byte offset on corrupt input.
Dataset load_dataset(const std::string& path);

}  // namespace bee

#include "bee/harness/dataset.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace bee {

static_assert(std::endian::native == std::endian::little,
              "dataset io assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'B', 'E', 'E', 'D'};

void write_error(const std::string& path) {
  throw std::runtime_error("save_dataset: write failed for " + path);
}

[[noreturn]] void corrupt(const std::string& path, std::streamoff offset,
                          const std::string& what) {
  throw std::runtime_error("load_dataset: " + what + " in " + path +
                           " at byte offset " + std::to_string(offset));
}

}  // namespace

void save_dataset(const std::string& path, const std::vector<Episode>& episodes,
                  const DatasetHeader& header) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_dataset: cannot open " + path);
  out.write(kMagic, 4);
  auto put = [&out](const auto& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
  };
  put(header.version);
  put(header.config_hash);
  put(header.episodes);
  put(header.horizon);
  put(header.image_h);
  put(header.image_w);
  put(header.action_dim);

  const size_t frame_size = static_cast<size_t>(header.image_h) * header.image_w;
  std::vector<unsigned char> frame(frame_size);
  for (const Episode& ep : episodes) {
    if (ep.obs.size() != header.horizon + 1 ||
        ep.actions.size() != header.horizon)
      throw std::invalid_argument("save_dataset: episode shape mismatch");
    for (const Observation& obs : ep.obs) {
      if (obs.image.size() != static_cast<long>(frame_size))
        throw std::invalid_argument("save_dataset: image size mismatch");
      for (size_t i = 0; i < frame_size; ++i)
        frame[i] = static_cast<unsigned char>(std::lround(obs.image(i) * 255.0));
      out.write(reinterpret_cast<const char*>(frame.data()),
                static_cast<std::streamsize>(frame.size()));
    }
    for (const Action& a : ep.actions) {
      put(a.dx);
      put(a.dy);
    }
  }
  if (!out) write_error(path);
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_dataset: cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) corrupt(path, 0, "bad magic");

  Dataset ds;
  auto get = [&](auto& v, const char* what) {
    const std::streamoff at = in.tellg();
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!in) corrupt(path, at, std::string("truncated ") + what);
  };
  get(ds.header.version, "version");
  if (ds.header.version != 1)
    corrupt(path, 4, "unsupported version " + std::to_string(ds.header.version));
  get(ds.header.config_hash, "config hash");
  get(ds.header.episodes, "episode count");
  get(ds.header.horizon, "horizon");
  get(ds.header.image_h, "image height");
  get(ds.header.image_w, "image width");
  get(ds.header.action_dim, "action dim");
  if (ds.header.action_dim != 2)
    corrupt(path, 0, "unsupported action dim " + std::to_string(ds.header.action_dim));

  const size_t frame_size = static_cast<size_t>(ds.header.image_h) * ds.header.image_w;
  std::vector<unsigned char> frame(frame_size);
  for (std::uint32_t e = 0; e < ds.header.episodes; ++e) {
    Episode ep;
    for (std::uint32_t t = 0; t <= ds.header.horizon; ++t) {
      const std::streamoff at = in.tellg();
      in.read(reinterpret_cast<char*>(frame.data()),
              static_cast<std::streamsize>(frame.size()));
      if (!in) corrupt(path, at, "truncated frame");
      Observation obs;
      obs.image = VectorXd(static_cast<long>(frame_size));
      for (size_t i = 0; i < frame_size; ++i) obs.image(i) = frame[i] / 255.0;
      ep.obs.push_back(std::move(obs));
    }
    for (std::uint32_t t = 0; t < ds.header.horizon; ++t) {
      Action a;
      get(a.dx, "action");
      get(a.dy, "action");
      ep.actions.push_back(a);
    }
    ds.episodes.push_back(std::move(ep));
  }
  return ds;
}

}  // namespace bee

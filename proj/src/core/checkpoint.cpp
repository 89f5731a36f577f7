#include "bee/core/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace bee {

static_assert(std::endian::native == std::endian::little,
              "checkpoint io assumes a little-endian host");

void save_checkpoint(const std::string& path,
                     const std::vector<const ParamTensor*>& tensors,
                     const std::string& meta_key, std::uint64_t meta_value) {
  nlohmann::json header;
  header["tensors"] = nlohmann::json::array();
  for (const ParamTensor* t : tensors) {
    header["tensors"].push_back({{"name", t->name},
                                 {"rows", t->value.rows()},
                                 {"cols", t->value.cols()}});
  }
  if (!meta_key.empty()) header[meta_key] = meta_value;
  const std::string js = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path);
  const std::uint32_t len = static_cast<std::uint32_t>(js.size());
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(js.data(), static_cast<std::streamsize>(js.size()));
  for (const ParamTensor* t : tensors) {
    for (int i = 0; i < t->value.rows(); ++i)
      for (int j = 0; j < t->value.cols(); ++j) {
        const double v = t->value(i, j);
        out.write(reinterpret_cast<const char*>(&v), sizeof(v));
      }
  }
  if (!out) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

void load_checkpoint(const std::string& path,
                     const std::vector<ParamTensor*>& tensors) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);
  std::uint32_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  if (!in) throw std::runtime_error("load_checkpoint: truncated header length");
  std::string js(len, '\0');
  in.read(js.data(), len);
  if (!in) throw std::runtime_error("load_checkpoint: truncated JSON header");
  nlohmann::json header = nlohmann::json::parse(js);
  const auto& list = header.at("tensors");
  if (list.size() != tensors.size())
    throw std::runtime_error("load_checkpoint: tensor count mismatch");
  for (size_t k = 0; k < tensors.size(); ++k) {
    const auto& entry = list[k];
    ParamTensor* t = tensors[k];
    if (entry.at("name").get<std::string>() != t->name ||
        entry.at("rows").get<long>() != t->value.rows() ||
        entry.at("cols").get<long>() != t->value.cols())
      throw std::runtime_error("load_checkpoint: tensor '" + t->name +
                               "' does not match file entry " +
                               std::to_string(k));
    for (int i = 0; i < t->value.rows(); ++i)
      for (int j = 0; j < t->value.cols(); ++j) {
        double v = 0.0;
        in.read(reinterpret_cast<char*>(&v), sizeof(v));
        if (!in)
          throw std::runtime_error("load_checkpoint: truncated values at '" +
                                   t->name + "'");
        t->value(i, j) = v;
      }
    t->zero_grad();
  }
}

}  // namespace bee

#pragma once

#include <string>
#include <vector>

#include "bee/core/tensor.hpp"

namespace bee {

/// Checkpoint layout: a little-endian uint32 JSON byte length, the JSON
/// header (tensor names and shapes in serialization order, plus optional
/// metadata), then the values as little-endian 64-bit floats, row-major,
/// in header order.
void save_checkpoint(const std::string& path,
                     const std::vector<const ParamTensor*>& tensors,
                     const std::string& meta_key = "",
                     std::uint64_t meta_value = 0);

/// Loads into the given tensors; names and shapes must match the file.
void load_checkpoint(const std::string& path,
                     const std::vector<ParamTensor*>& tensors);

}  // namespace bee

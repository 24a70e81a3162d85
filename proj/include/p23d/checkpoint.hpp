#pragma once

#include <string>
#include <utility>
#include <vector>

#include "p23d/tensor.hpp"

namespace p23d {

using NamedTensors = std::vector<std::pair<std::string, num::Tensor>>;

// "P23D" checkpoint segment: magic, u32 format version, u32 parameter count,
// then per parameter: u32 name length, name bytes, u32 rank, u32 dims,
// little-endian float32 payload. Model metadata (resolutions, rng algo id,
// config hash) travels as scalar "meta/..." entries in the same format.
inline constexpr uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::string& path, const NamedTensors& tensors);
NamedTensors load_checkpoint(const std::string& path);

// Lookup helper; throws DataError when absent.
const num::Tensor& find_tensor(const NamedTensors& tensors,
                               const std::string& name);
bool has_tensor(const NamedTensors& tensors, const std::string& name);

}  // namespace p23d

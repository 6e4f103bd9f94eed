#pragma once

#include "vq/types.hpp"

#include <string>
#include <vector>

namespace vq {

// WTS container (little-endian):
//   magic "WTS1" | u32 layer count
//   per layer: u16 name length | name bytes | u32 o | u32 i | o*i f32 row-major
//   trailing u32 CRC32 over all preceding bytes
ModelBundle load_bundle(const std::string& path);
void save_bundle(const ModelBundle& bundle, const std::string& path);

// In-memory encode/decode of the same byte layout; save/load are thin
// file wrappers around these.
std::vector<std::uint8_t> encode_bundle(const ModelBundle& bundle);
ModelBundle decode_bundle(const std::vector<std::uint8_t>& bytes);

/// Per-layer summary used by `weights inspect`.
struct LayerStats {
  std::string name;
  Index rows = 0;
  Index cols = 0;
  double min = 0, max = 0, mean = 0, stddev = 0;
  Index outliers = 0;  // entries with |x - mean| > 6 stddev
};

LayerStats layer_stats(const WeightMatrix& w);

}  // namespace vq

#pragma once

#include "vq/types.hpp"

#include <cstdint>
#include <string>

namespace vq {

/// Generator settings for outlier-heavy synthetic weight matrices: a
/// Gaussian base with a small fraction of entries scaled up hard.
struct SyntheticSpec {
  Index rows = 128;
  Index cols = 128;
  double sigma = 0.05;
  double outlier_fraction = 0.01;  // must lie in [0, 0.1]
  double outlier_scale = 20.0;
  std::uint64_t seed = 1;
};

WeightMatrix gen_weights(const SyntheticSpec& spec, const std::string& name = "synthetic");

/// Round-to-nearest uniform quantization baseline. bits >= 2 uses a
/// symmetric per-tensor grid with scale max|w| / (2^(bits-1) - 1) and
/// round-half-away-from-zero; bits == 1 is sign quantization at scale
/// mean|w|. An all-zero tensor maps to itself (scale 0).
WeightMatrix baseline_rtn(const WeightMatrix& w, int bits);

/// Mean squared elementwise difference.
double weight_mse(const MatF& a, const MatF& b);

}  // namespace vq

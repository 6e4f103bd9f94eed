#include "vq/synthetic.hpp"

#include "vq/rng.hpp"

#include <cmath>
#include <numeric>
#include <vector>

namespace vq {

WeightMatrix gen_weights(const SyntheticSpec& spec, const std::string& name) {
  if (spec.rows <= 0 || spec.cols <= 0)
    throw ContractError("gen_weights: dimensions must be positive");
  if (!(spec.outlier_fraction >= 0.0 && spec.outlier_fraction <= 0.1))
    throw ContractError("gen_weights: outlier fraction must lie in [0, 0.1]");

  SplitMix64 rng(spec.seed);
  WeightMatrix w;
  w.name = name;
  w.values.resize(spec.rows, spec.cols);
  float* data = w.values.data();
  const Index total = spec.rows * spec.cols;
  for (Index t = 0; t < total; ++t)
    data[t] = static_cast<float>(spec.sigma * rng.next_normal());

  // Scale a distinct random subset of positions (partial Fisher-Yates).
  const Index n_out = static_cast<Index>(spec.outlier_fraction * static_cast<double>(total));
  if (n_out > 0) {
    std::vector<Index> pos(static_cast<std::size_t>(total));
    std::iota(pos.begin(), pos.end(), Index{0});
    for (Index j = 0; j < n_out; ++j) {
      const Index pick =
          j + static_cast<Index>(rng.next_below(static_cast<std::uint64_t>(total - j)));
      std::swap(pos[static_cast<std::size_t>(j)], pos[static_cast<std::size_t>(pick)]);
      data[pos[static_cast<std::size_t>(j)]] *= static_cast<float>(spec.outlier_scale);
    }
  }
  return w;
}

WeightMatrix baseline_rtn(const WeightMatrix& w, int bits) {
  if (bits < 1 || bits > 8) throw ContractError("baseline_rtn: bits must lie in [1, 8]");
  WeightMatrix q;
  q.name = w.name;
  q.values.resize(w.rows(), w.cols());

  if (bits == 1) {
    const float scale = w.values.cwiseAbs().mean();
    q.values = w.values.unaryExpr([scale](float v) { return v >= 0.0f ? scale : -scale; });
    return q;
  }

  const float levels = static_cast<float>((1 << (bits - 1)) - 1);
  const float maxabs = w.values.cwiseAbs().maxCoeff();
  if (maxabs == 0.0f) {
    q.values.setZero();
    return q;
  }
  const float scale = maxabs / levels;
  // std::round is round-half-away-from-zero, the stated tie rule.
  q.values = w.values.unaryExpr([scale, levels](float v) {
    const float g = std::round(v / scale);
    return scale * std::clamp(g, -levels, levels);
  });
  return q;
}

double weight_mse(const MatF& a, const MatF& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ContractError("weight_mse: shape mismatch");
  double acc = 0;
  for (Index r = 0; r < a.rows(); ++r)
    for (Index c = 0; c < a.cols(); ++c) {
      const double d = static_cast<double>(a(r, c)) - static_cast<double>(b(r, c));
      acc += d * d;
    }
  return acc / static_cast<double>(a.size());
}

}  // namespace vq

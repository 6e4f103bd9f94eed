#pragma once

#include "vq/types.hpp"

#include <cstdint>
#include <vector>

namespace vq {

/// Settings for the convex-combination search over candidate codewords.
struct ConvexConfig {
  Index candidates = 4;             // hull size n per sub-vector
  float replace_threshold = 1e-2f;  // ratio below which a candidate is replaced
  float lr_codebook = 1e-5f;
  float lr_scores = 5e-2f;
  Index init_steps = 100;           // reconstruction-error warmup steps
  Index replace_every = 1;          // optimizer steps between replacement sweeps
};

inline void validate(const ConvexConfig& cfg, Index k) {
  if (cfg.candidates < 2) throw ContractError("convex config: candidate count must be >= 2");
  if (cfg.candidates > k)
    throw ContractError("convex config: candidate count exceeds codebook size");
  if (!(cfg.replace_threshold > 0.0f && cfg.replace_threshold < 1.0f))
    throw ContractError("convex config: replacement threshold must lie in (0, 1)");
  if (cfg.replace_every < 1) throw ContractError("convex config: replace_every must be >= 1");
}

// ---------------------------------------------------------------------------
// Scalar-templated math core. The calibration pipeline instantiates float;
// the gradient-check suites instantiate double against the same expressions.
// ---------------------------------------------------------------------------

/// Numerically stable softmax of a score vector (max-subtracted).
template <class Derived>
Vec<typename Derived::Scalar> softmax(const Eigen::MatrixBase<Derived>& scores) {
  using Scalar = typename Derived::Scalar;
  Vec<Scalar> z = scores.derived().reshaped();
  const Scalar zmax = z.maxCoeff();
  Vec<Scalar> e = (z.array() - zmax).exp().matrix();
  return e / e.sum();
}

/// Convex combination of candidate codewords (rows of `cand`) with `ratios`.
template <class Scalar>
Vec<Scalar> convex_combine(const Mat<Scalar>& cand, const Vec<Scalar>& ratios) {
  return cand.transpose() * ratios;
}

/// Gradient of a loss w.r.t. the candidate scores, given the upstream
/// gradient w.r.t. the reconstructed sub-vector: the softmax Jacobian
/// contracted with the per-candidate sensitivities g.c_j.
template <class Scalar>
Vec<Scalar> score_grad(const Vec<Scalar>& upstream, const Mat<Scalar>& cand,
                       const Vec<Scalar>& ratios) {
  const Vec<Scalar> p = cand * upstream;  // p_j = upstream . c_j
  const Scalar pbar = ratios.dot(p);
  return (ratios.array() * (p.array() - pbar)).matrix();
}

/// Sum_m r_m (1 - r_m): zero exactly at the simplex vertices, maximal at
/// the uniform point where it equals (n-1)/n.
template <class Scalar>
Scalar simplex_spread(const Vec<Scalar>& ratios) {
  return (ratios.array() * (Scalar(1) - ratios.array())).sum();
}

/// Gradient of simplex_spread w.r.t. the scores feeding the softmax.
template <class Scalar>
Vec<Scalar> spread_score_grad(const Vec<Scalar>& ratios) {
  const Vec<Scalar> w = (Scalar(1) - Scalar(2) * ratios.array()).matrix();
  const Scalar avg = ratios.dot(w);
  return (ratios.array() * (w.array() - avg)).matrix();
}

/// Accumulate per-sub-vector upstream gradients into a k x d codebook
/// gradient, in fixed row-major sub-vector order. Unconfirmed sub-vectors
/// contribute ratio-weighted rows to each candidate; confirmed ones
/// contribute their full row to the confirmed codeword (one-hot ratios).
template <class Scalar>
Mat<Scalar> codebook_grad(const Mat<Scalar>& upstream, const IndexMat& candidates,
                          const Mat<Scalar>& ratios, const std::vector<std::uint8_t>& confirmed,
                          const std::vector<std::int32_t>& confirmed_index, Index k) {
  Mat<Scalar> g = Mat<Scalar>::Zero(k, upstream.cols());
  for (Index t = 0; t < upstream.rows(); ++t) {
    if (confirmed[static_cast<std::size_t>(t)]) {
      g.row(confirmed_index[static_cast<std::size_t>(t)]) += upstream.row(t);
      continue;
    }
    for (Index m = 0; m < candidates.cols(); ++m)
      g.row(candidates(t, m)) += ratios(t, m) * upstream.row(t);
  }
  return g;
}

// ---------------------------------------------------------------------------
// Per-layer calibration state (float pipeline).
// ---------------------------------------------------------------------------

/// Soft representation of every sub-vector in one layer: n candidate
/// codeword indices plus n learnable scores each. Once a sub-vector is
/// confirmed its effective ratio vector is the one-hot of confirmed_index
/// and its scores are frozen.
struct SoftState {
  IndexMat candidates;                       // count x n, pairwise distinct per row
  MatF scores;                               // count x n
  std::vector<std::uint8_t> confirmed;       // count
  std::vector<std::int32_t> confirmed_index; // count, -1 while unconfirmed

  Index count() const { return candidates.rows(); }
  Index fanout() const { return candidates.cols(); }

  Index confirmed_count() const {
    Index c = 0;
    for (const auto f : confirmed) c += f ? 1 : 0;
    return c;
  }
};

/// The n nearest codewords to `w`, sorted by ascending squared distance,
/// ties resolved to the lowest index.
IndexVec select_candidates(const Eigen::Ref<const Eigen::RowVectorXf>& w, const Codebook& cb,
                           Index n);

/// Candidate selection plus score initialization for a whole layer. Scores
/// start at -|w - c|^2 / T with T the layer mean nearest-candidate squared
/// distance, so initial ratios already favor nearby codewords.
SoftState init_soft_state(const SubVectorTable& table, const Codebook& cb, Index n);

/// Softmax ratios for every sub-vector row (confirmed rows included; their
/// consumers must branch on the confirmed flag).
MatF all_ratios(const SoftState& st);

/// Reconstructed sub-vectors, one per row of `out`: convex combinations for
/// unconfirmed rows, verbatim codeword copies for confirmed ones.
void reconstruct_rows(const SoftState& st, const Codebook& cb, const MatF& ratios,
                      Eigen::Ref<MatF> out);

/// Reconstruct the full o x i quantized weight matrix.
MatF reconstruct_weights(const SoftState& st, const Codebook& cb, Index rows, Index cols);

struct InitPhaseReport {
  double initial_loss = 0;
  double final_loss = 0;
  Index steps = 0;
};

/// Warmup phase: minimize |W - What|^2 with Adamax on both the scores and
/// the shared codebook before the task-driven calibration loop starts.
InitPhaseReport init_phase(const SubVectorTable& table, SoftState& st, Codebook& cb,
                           const ConvexConfig& cfg);

struct ReplaceStats {
  Index replaced = 0;
  Index affected_subvectors = 0;
};

/// Instrumentation for the replacement perturbation bound: each sweep must
/// move a reconstruction by no more than threshold * max pairwise codeword
/// distance.
struct ReplaceCheck {
  std::uint64_t checks = 0;
  std::uint64_t violations = 0;
  double max_perturbation = 0;
  double bound = 0;
};

/// Adaptive candidate replacement: every unconfirmed candidate whose ratio
/// is below `lambda` is swapped for the codeword outside the current
/// candidate set that is closest to the current reconstruction. Scores keep
/// their old values, so the reconstruction moves only slightly; candidate
/// sets stay duplicate-free. No-op when the hull already spans the whole
/// codebook (n = k).
ReplaceStats replace_sweep(SoftState& st, const Codebook& cb, float lambda,
                           ReplaceCheck* check = nullptr);

double max_pairwise_distance(const Codebook& cb);

}  // namespace vq

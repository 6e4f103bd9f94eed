#pragma once

#include "vq/convex.hpp"
#include "vq/rng.hpp"
#include "vq/types.hpp"

#include <array>
#include <cstdint>
#include <vector>

namespace vq {

/// Per-layer k-means seed derivation, shared by calibrate() and the harness
/// baselines so every arm of a study starts from the same codebooks.
inline std::uint64_t layer_seed(std::uint64_t root, Index layer) {
  SplitMix64 rng(root);
  std::uint64_t s = 0;
  for (Index l = 0; l <= layer; ++l) s = rng.split().next_u64();
  return s;
}

/// Calibration loop settings.
struct CalibConfig {
  double tau = 0.99;          // confirmation threshold on the max soft ratio
  Index max_epochs = 32;
  Index batch = 128;
  double w_task = 1.0;
  double w_bkd = 1.0;
  double w_reg = 1.0;
  bool enable_replacement = true;
  bool enable_incremental = true;
  bool check_invariants = false;
  std::uint64_t seed = 1;
  Index kmeans_iters = 100;
  double kmeans_tol = 1e-6;
};

inline void validate(const CalibConfig& cfg) {
  if (!(cfg.tau > 0.5 && cfg.tau < 1.0))
    throw ContractError("calib config: tau must lie in (0.5, 1)");
  if (cfg.max_epochs < 1) throw ContractError("calib config: max_epochs must be >= 1");
  if (cfg.batch < 1) throw ContractError("calib config: batch must be >= 1");
}

constexpr Index kHistogramBins = 20;  // width 0.05 over [0, 1]

/// Histogram of max_m r_m per sub-vector; confirmed sub-vectors count at 1.0
/// (the top bin).
std::array<std::uint64_t, kHistogramBins> max_ratio_histogram(const SoftState& st);

/// Accumulating overload for multi-layer snapshots.
void max_ratio_histogram(const SoftState& st, std::array<std::uint64_t, kHistogramBins>& bins);

struct EpochStats {
  double task = 0;  // epoch means
  double bkd = 0;
  double reg = 0;
  Index steps = 0;
  Index reg_included_steps = 0;
  double confirmed_fraction = 0;  // at epoch end
  double truncation_error = 0;    // sum over confirmations made this epoch
  std::array<std::uint64_t, kHistogramBins> histogram{};
};

struct InvariantStats {
  std::uint64_t simplex_checks = 0, simplex_violations = 0;
  std::uint64_t hull_checks = 0, hull_violations = 0;
  std::uint64_t replace_checks = 0, replace_violations = 0;
  std::uint64_t truncation_checks = 0, truncation_violations = 0;
  double max_replace_perturbation = 0;
};

struct CalibReport {
  std::vector<EpochStats> epochs;
  double final_calib_loss = 0;  // task loss over the full calibration set, pre-finalize
  double final_infer_loss = 0;  // task loss from the packed C[A] representation
  double total_truncation = 0;  // accumulated over threshold confirmations
  double force_residual = 0;    // accumulated over terminal force confirmations
  Index force_confirmed = 0;
  bool fully_confirmed_by_threshold = false;
  // True when the packed C[A] reconstruction is bit-identical to the last
  // calibration-time weights; holds whenever no force confirmation occurred.
  bool representation_bit_equal = false;
  InvariantStats invariants;
  std::vector<double> kmeans_distortion;       // per layer
  std::vector<InitPhaseReport> init_reports;   // per layer
};

/// Bridge between the calibration loop and whatever network consumes the
/// quantized matrices. forward() must cache whatever backward() needs;
/// backward() receives gradients w.r.t. outputs and per-block features and
/// returns the gradient w.r.t. each weight matrix, in layer order.
class ModelAdapter {
 public:
  struct Forward {
    MatF outputs;
    std::vector<MatF> blocks;
  };

  virtual ~ModelAdapter() = default;
  virtual Index layer_count() const = 0;
  virtual Forward forward(const MatF& inputs, const std::vector<MatF>& weights) = 0;
  virtual std::vector<MatF> backward(const MatF& grad_outputs,
                                     const std::vector<MatF>& grad_blocks) = 0;
};

struct ConfirmStats {
  Index confirmed = 0;
  double truncation = 0;
};

/// Confirm every unconfirmed sub-vector whose max soft ratio strictly
/// exceeds tau, recording the squared truncation jump |c* - sum(C R)|^2.
ConfirmStats confirm_step(SoftState& st, const Codebook& cb, double tau,
                          InvariantStats* inv = nullptr);

struct ForceStats {
  Index forced = 0;
  double residual = 0;
};

/// Terminal sweep: confirm all remaining sub-vectors at their argmax-ratio
/// candidate (lowest slot wins ties) so the assignment is total.
ForceStats finalize_force_confirm(SoftState& st, const Codebook& cb);

/// Hard assignment table of a fully confirmed state.
Assignments to_assignments(const SoftState& st, Index rows, Index slots);

struct CalibResult {
  std::vector<Codebook> codebooks;
  std::vector<Assignments> assignments;
  CalibReport report;
};

/// Full pipeline for one bundle: per layer k-means seeding + Lloyd,
/// candidate selection, reconstruction-error warmup, then the batched
/// calibration loop with gradient updates, adaptive candidate replacement,
/// and incremental confirmation. Targets are whatever the caller wants the
/// quantized network to match (the toy harnesses use full-precision
/// outputs).
CalibResult calibrate(const ModelBundle& bundle, ModelAdapter& adapter, const MatF& inputs,
                      const MatF& targets, Index subdim, Index k, const ConvexConfig& ccfg,
                      const CalibConfig& cfg);

}  // namespace vq

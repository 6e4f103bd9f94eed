#pragma once

#include "vq/calibrate.hpp"
#include "vq/synthetic.hpp"
#include "vq/toys.hpp"

#include <json.hpp>

#include <array>
#include <memory>
#include <string>
#include <vector>

namespace vq {

/// The standard synthetic benchmark: two 128x128 outlier-heavy layers
/// (1% outliers scaled x20) behind a toy MLP, calibrated on 4096 seeded
/// Gaussian samples against the full-precision outputs, 2-bit preset
/// (k=256, d=4).
struct StandardBenchmark {
  ModelBundle bundle;
  std::unique_ptr<MLPAdapter> adapter;
  MatF inputs;
  MatF targets;
};

StandardBenchmark make_standard_benchmark(std::uint64_t seed);
ConvexConfig benchmark_convex_config();
CalibConfig benchmark_calib_config(std::uint64_t seed);

/// Task loss of a fixed set of weight matrices under an adapter.
double eval_task_loss(ModelAdapter& adapter, const std::vector<MatF>& weights,
                      const MatF& inputs, const MatF& targets);

struct AblationArm {
  std::string name;
  double infer_loss = 0;  // task loss from the packed C[A] representation
  double calib_loss = 0;
  double truncation = 0;      // accumulated threshold-confirmation error
  double force_residual = 0;  // one-shot / terminal conversion error
};

struct AblationReport {
  std::vector<AblationArm> arms;  // baseline VQ, +combination, +incremental
};

AblationReport run_ablation(std::uint64_t seed);

struct ConsistencyRow {
  std::string name;
  double calib_loss = 0;
  double infer_loss = 0;
  double gap = 0;  // infer - calib
  bool representation_bit_equal = false;
  Index force_confirmed = 0;
};

struct ConsistencyReport {
  std::vector<ConsistencyRow> rows;  // incremental, one-shot
};

ConsistencyReport run_consistency(std::uint64_t seed);

struct HistogramReport {
  std::vector<std::array<std::uint64_t, kHistogramBins>> epochs;
  std::uint64_t subvector_count = 0;
};

HistogramReport run_histogram(std::uint64_t seed);

struct OutlierReport {
  double mse_rtn = 0;
  double mse_kmeans = 0;
  double mse_vimvq = 0;
};

/// Weight-space MSE at a matched 2-bit rate on one synthetic outlier layer.
OutlierReport run_rtn_vs_vq(std::uint64_t seed);

struct SsmReport {
  double max_duality_rel_error = 0;  // scan vs convolution over random cores
  double heldout_output_mse = 0;     // quantized vs fp block on held-out data
  double calib_loss = 0;
  double infer_loss = 0;
};

SsmReport run_ssm(std::uint64_t seed);

// JSON renderings for the bench CLI and test fixtures.
nlohmann::json report_json(const CalibReport& r);
nlohmann::json report_json(const AblationReport& r);
nlohmann::json report_json(const ConsistencyReport& r);
nlohmann::json report_json(const HistogramReport& r);
nlohmann::json report_json(const OutlierReport& r);
nlohmann::json report_json(const SsmReport& r);

// Flat CSV renderings for plotting.
std::string report_csv(const AblationReport& r);
std::string report_csv(const ConsistencyReport& r);
std::string report_csv(const HistogramReport& r);
std::string report_csv(const OutlierReport& r);
std::string report_csv(const SsmReport& r);

}  // namespace vq

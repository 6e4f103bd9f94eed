#include "vq/harness.hpp"

#include "vq/kmeans.hpp"
#include "vq/packfmt.hpp"
#include "vq/qinfer.hpp"
#include "vq/rng.hpp"

#include <sstream>

namespace vq {

namespace {

MatF gaussian_matrix(Index rows, Index cols, std::uint64_t seed) {
  SplitMix64 rng(seed);
  MatF m(rows, cols);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) m(r, c) = rng.next_normal_f();
  return m;
}

VecF gaussian_vector(Index n, float sigma, std::uint64_t seed) {
  SplitMix64 rng(seed);
  VecF v(n);
  for (Index t = 0; t < n; ++t) v[t] = sigma * rng.next_normal_f();
  return v;
}

constexpr Index kBenchDim = 128;
constexpr Index kBenchSamples = 4096;
constexpr Index kBenchSubdim = 4;    // 2-bit preset
constexpr Index kBenchCodebook = 256;

}  // namespace

StandardBenchmark make_standard_benchmark(std::uint64_t seed) {
  SplitMix64 root(seed);
  const std::uint64_t s_w1 = root.next_u64();
  const std::uint64_t s_w2 = root.next_u64();
  const std::uint64_t s_b1 = root.next_u64();
  const std::uint64_t s_b2 = root.next_u64();
  const std::uint64_t s_in = root.next_u64();

  StandardBenchmark bench;
  SyntheticSpec spec;
  spec.rows = kBenchDim;
  spec.cols = kBenchDim;
  spec.sigma = 0.05;
  spec.outlier_fraction = 0.01;
  spec.outlier_scale = 20.0;

  spec.seed = s_w1;
  bench.bundle.layers.push_back(gen_weights(spec, "mlp.fc1"));
  spec.seed = s_w2;
  bench.bundle.layers.push_back(gen_weights(spec, "mlp.fc2"));
  bench.bundle.metadata["model"] = "toy-mlp-128";

  bench.adapter = std::make_unique<MLPAdapter>(gaussian_vector(kBenchDim, 0.01f, s_b1),
                                               gaussian_vector(kBenchDim, 0.01f, s_b2));
  bench.inputs = gaussian_matrix(kBenchSamples, kBenchDim, s_in);

  std::vector<MatF> fp = {bench.bundle.layers[0].values, bench.bundle.layers[1].values};
  bench.targets = bench.adapter->forward(bench.inputs, fp).outputs;
  return bench;
}

ConvexConfig benchmark_convex_config() {
  ConvexConfig cfg;
  cfg.candidates = 4;
  cfg.replace_threshold = 1e-2f;
  cfg.lr_codebook = 1e-5f;
  cfg.lr_scores = 5e-2f;
  cfg.init_steps = 100;
  cfg.replace_every = 1;
  return cfg;
}

CalibConfig benchmark_calib_config(std::uint64_t seed) {
  CalibConfig cfg;
  cfg.tau = 0.99;
  cfg.max_epochs = 48;
  cfg.batch = 128;
  cfg.seed = seed;
  return cfg;
}

double eval_task_loss(ModelAdapter& adapter, const std::vector<MatF>& weights,
                      const MatF& inputs, const MatF& targets) {
  return loss_task<float>(adapter.forward(inputs, weights).outputs, targets).value;
}

namespace {

// Hard K-Means baseline of one bundle, seeded exactly like calibrate().
std::vector<MatF> kmeans_baseline_weights(const ModelBundle& bundle, Index subdim, Index k,
                                          const CalibConfig& cfg) {
  std::vector<MatF> decoded;
  for (Index l = 0; l < static_cast<Index>(bundle.layers.size()); ++l) {
    const auto& wm = bundle.layers[static_cast<std::size_t>(l)];
    const SubVectorTable table = partition(wm, subdim);
    Codebook seeded = kmeanspp_seed(table, k, layer_seed(cfg.seed, l));
    LloydResult km = lloyd(table, std::move(seeded), cfg.kmeans_iters, cfg.kmeans_tol);
    decoded.push_back(decode(pack_layer(wm.name, km.codebook, km.assignments)));
  }
  return decoded;
}

}  // namespace

AblationReport run_ablation(std::uint64_t seed) {
  StandardBenchmark bench = make_standard_benchmark(seed);
  const ConvexConfig ccfg = benchmark_convex_config();
  const CalibConfig base = benchmark_calib_config(seed);

  AblationReport report;

  {
    AblationArm arm;
    arm.name = "baseline-vq";
    const auto weights =
        kmeans_baseline_weights(bench.bundle, kBenchSubdim, kBenchCodebook, base);
    arm.infer_loss = eval_task_loss(*bench.adapter, weights, bench.inputs, bench.targets);
    arm.calib_loss = arm.infer_loss;
    report.arms.push_back(arm);
  }

  {
    CalibConfig cfg = base;
    cfg.enable_incremental = false;
    const CalibResult res = calibrate(bench.bundle, *bench.adapter, bench.inputs,
                                      bench.targets, kBenchSubdim, kBenchCodebook, ccfg, cfg);
    AblationArm arm;
    arm.name = "combination-optimization";
    arm.infer_loss = res.report.final_infer_loss;
    arm.calib_loss = res.report.final_calib_loss;
    arm.truncation = res.report.total_truncation;
    arm.force_residual = res.report.force_residual;
    report.arms.push_back(arm);
  }

  {
    const CalibResult res = calibrate(bench.bundle, *bench.adapter, bench.inputs,
                                      bench.targets, kBenchSubdim, kBenchCodebook, ccfg, base);
    AblationArm arm;
    arm.name = "incremental-quantization";
    arm.infer_loss = res.report.final_infer_loss;
    arm.calib_loss = res.report.final_calib_loss;
    arm.truncation = res.report.total_truncation;
    arm.force_residual = res.report.force_residual;
    report.arms.push_back(arm);
  }

  return report;
}

ConsistencyReport run_consistency(std::uint64_t seed) {
  StandardBenchmark bench = make_standard_benchmark(seed);
  const ConvexConfig ccfg = benchmark_convex_config();
  const CalibConfig base = benchmark_calib_config(seed);

  ConsistencyReport report;
  {
    const CalibResult res = calibrate(bench.bundle, *bench.adapter, bench.inputs,
                                      bench.targets, kBenchSubdim, kBenchCodebook, ccfg, base);
    ConsistencyRow row;
    row.name = "incremental";
    row.calib_loss = res.report.final_calib_loss;
    row.infer_loss = res.report.final_infer_loss;
    row.gap = row.infer_loss - row.calib_loss;
    row.representation_bit_equal = res.report.representation_bit_equal;
    row.force_confirmed = res.report.force_confirmed;
    report.rows.push_back(row);
  }
  {
    CalibConfig cfg = base;
    cfg.enable_incremental = false;
    const CalibResult res = calibrate(bench.bundle, *bench.adapter, bench.inputs,
                                      bench.targets, kBenchSubdim, kBenchCodebook, ccfg, cfg);
    ConsistencyRow row;
    row.name = "one-shot";
    row.calib_loss = res.report.final_calib_loss;
    row.infer_loss = res.report.final_infer_loss;
    row.gap = row.infer_loss - row.calib_loss;
    row.representation_bit_equal = res.report.representation_bit_equal;
    row.force_confirmed = res.report.force_confirmed;
    report.rows.push_back(row);
  }
  return report;
}

HistogramReport run_histogram(std::uint64_t seed) {
  StandardBenchmark bench = make_standard_benchmark(seed);
  const ConvexConfig ccfg = benchmark_convex_config();
  const CalibConfig cfg = benchmark_calib_config(seed);
  const CalibResult res = calibrate(bench.bundle, *bench.adapter, bench.inputs, bench.targets,
                                    kBenchSubdim, kBenchCodebook, ccfg, cfg);
  HistogramReport report;
  for (const auto& epoch : res.report.epochs) {
    report.epochs.push_back(epoch.histogram);
    std::uint64_t total = 0;
    for (const auto b : epoch.histogram) total += b;
    report.subvector_count = total;
  }
  return report;
}

OutlierReport run_rtn_vs_vq(std::uint64_t seed) {
  SplitMix64 root(seed);
  SyntheticSpec spec;
  spec.rows = kBenchDim;
  spec.cols = kBenchDim;
  spec.sigma = 0.05;
  spec.outlier_fraction = 0.01;
  spec.outlier_scale = 20.0;
  spec.seed = root.next_u64();
  const std::uint64_t s_in = root.next_u64();
  const WeightMatrix w = gen_weights(spec, "outlier.layer");

  OutlierReport report;
  report.mse_rtn = weight_mse(w.values, baseline_rtn(w, 2).values);

  CalibConfig cfg = benchmark_calib_config(seed);
  {
    ModelBundle bundle;
    bundle.layers.push_back(w);
    const auto decoded = kmeans_baseline_weights(bundle, kBenchSubdim, kBenchCodebook, cfg);
    report.mse_kmeans = weight_mse(w.values, decoded[0]);
  }
  {
    ModelBundle bundle;
    bundle.layers.push_back(w);
    LinearProbeAdapter adapter(bundle);
    const MatF inputs = gaussian_matrix(kBenchSamples, adapter.input_width(), s_in);
    const MatF targets = adapter.forward(inputs, {w.values}).outputs;
    const CalibResult res = calibrate(bundle, adapter, inputs, targets, kBenchSubdim,
                                      kBenchCodebook, benchmark_convex_config(), cfg);
    const MatF decoded = decode(pack_layer(w.name, res.codebooks[0], res.assignments[0]));
    report.mse_vimvq = weight_mse(w.values, decoded);
  }
  return report;
}

SsmReport run_ssm(std::uint64_t seed) {
  SplitMix64 root(seed);
  SsmReport report;

  // Dual-form agreement over random stable cores.
  for (int trial = 0; trial < 24; ++trial) {
    SplitMix64 rng = root.split();
    const Index n = 2 + static_cast<Index>(rng.next_below(15));  // N in [2, 16]
    const Index m = 4 + static_cast<Index>(rng.next_below(61));  // M in [4, 64]
    MatD state(n, n);
    for (Index r = 0; r < n; ++r)
      for (Index c = 0; c < n; ++c) state(r, c) = 0.3 * rng.next_normal();
    state -= MatD::Identity(n, n);  // keep the continuous system stable
    VecD input(n);
    for (Index r = 0; r < n; ++r) input[r] = rng.next_normal();
    MatD readout(1, n);
    for (Index c = 0; c < n; ++c) readout(0, c) = rng.next_normal();
    const double dt = 0.05 + 0.2 * rng.next_double();

    const auto d = ssm_discretize<double>(state, input, dt);
    VecD x(m);
    for (Index t = 0; t < m; ++t) x[t] = rng.next_normal();
    const VecD via_scan = ssm_scan<double>(d.state, d.input, readout, x);
    const VecD via_conv = ssm_conv<double>(ssm_kernel<double>(d.state, d.input, readout, m), x);
    const double rel =
        (via_scan - via_conv).norm() / std::max(via_conv.norm(), 1e-30);
    report.max_duality_rel_error = std::max(report.max_duality_rel_error, rel);
  }

  // Quantize the projections of one toy block at the 3-bit preset.
  constexpr Index kSeq = 16, kFeat = 32, kChannels = 32, kState = 8;
  ToySSMBlock block;
  {
    SplitMix64 rng = root.split();
    block.state_matrix.resize(kState, kState);
    for (Index r = 0; r < kState; ++r)
      for (Index c = 0; c < kState; ++c) block.state_matrix(r, c) = 0.3 * rng.next_normal();
    block.state_matrix -= MatD::Identity(kState, kState);
    block.input_matrix.resize(kState);
    for (Index r = 0; r < kState; ++r) block.input_matrix[r] = rng.next_normal();
    block.output_matrix.resize(1, kState);
    for (Index c = 0; c < kState; ++c) block.output_matrix(0, c) = rng.next_normal();
    block.timestep = 0.1;
  }
  SyntheticSpec spec;
  spec.rows = kChannels;
  spec.cols = kFeat;
  spec.sigma = 0.05;
  spec.outlier_fraction = 0.01;
  spec.outlier_scale = 20.0;
  spec.seed = root.next_u64();
  block.in_proj = gen_weights(spec, "ssm.in_proj");
  spec.rows = kFeat;
  spec.cols = kChannels;
  spec.seed = root.next_u64();
  block.out_proj = gen_weights(spec, "ssm.out_proj");

  ModelBundle bundle;
  bundle.layers = {block.in_proj, block.out_proj};
  SSMAdapter adapter(block, kSeq);
  const MatF inputs = gaussian_matrix(1024, adapter.input_width(), root.next_u64());
  const std::vector<MatF> fp = {block.in_proj.values, block.out_proj.values};
  const MatF targets = adapter.forward(inputs, fp).outputs;

  CalibConfig cfg = benchmark_calib_config(seed);
  cfg.batch = 128;
  const CalibResult res =
      calibrate(bundle, adapter, inputs, targets, /*subdim=*/2, /*k=*/64,
                benchmark_convex_config(), cfg);
  report.calib_loss = res.report.final_calib_loss;
  report.infer_loss = res.report.final_infer_loss;

  // Held-out end-to-end error of the packed block.
  const MatF heldout = gaussian_matrix(256, adapter.input_width(), root.next_u64());
  const MatF fp_out = adapter.forward(heldout, fp).outputs;
  std::vector<MatF> quantized;
  for (std::size_t l = 0; l < bundle.layers.size(); ++l)
    quantized.push_back(decode(
        pack_layer(bundle.layers[l].name, res.codebooks[l], res.assignments[l])));
  const MatF q_out = adapter.forward(heldout, quantized).outputs;
  report.heldout_output_mse = weight_mse(fp_out, q_out);

  return report;
}

// ---------------------------------------------------------------------------
// Report rendering
// ---------------------------------------------------------------------------

nlohmann::json report_json(const CalibReport& r) {
  nlohmann::json epochs = nlohmann::json::array();
  for (const auto& e : r.epochs) {
    epochs.push_back({{"task", e.task},
                      {"bkd", e.bkd},
                      {"reg", e.reg},
                      {"steps", e.steps},
                      {"reg_included_steps", e.reg_included_steps},
                      {"confirmed_fraction", e.confirmed_fraction},
                      {"truncation_error", e.truncation_error},
                      {"max_ratio_histogram", e.histogram}});
  }
  return {{"epochs", epochs},
          {"final_calib_loss", r.final_calib_loss},
          {"final_infer_loss", r.final_infer_loss},
          {"total_truncation", r.total_truncation},
          {"force_residual", r.force_residual},
          {"force_confirmed", r.force_confirmed},
          {"fully_confirmed_by_threshold", r.fully_confirmed_by_threshold},
          {"representation_bit_equal", r.representation_bit_equal},
          {"kmeans_distortion", r.kmeans_distortion},
          {"invariants",
           {{"simplex_checks", r.invariants.simplex_checks},
            {"simplex_violations", r.invariants.simplex_violations},
            {"hull_checks", r.invariants.hull_checks},
            {"hull_violations", r.invariants.hull_violations},
            {"replace_checks", r.invariants.replace_checks},
            {"replace_violations", r.invariants.replace_violations},
            {"truncation_checks", r.invariants.truncation_checks},
            {"truncation_violations", r.invariants.truncation_violations},
            {"max_replace_perturbation", r.invariants.max_replace_perturbation}}}};
}

nlohmann::json report_json(const AblationReport& r) {
  nlohmann::json arms = nlohmann::json::array();
  for (const auto& a : r.arms)
    arms.push_back({{"name", a.name},
                    {"infer_loss", a.infer_loss},
                    {"calib_loss", a.calib_loss},
                    {"truncation", a.truncation},
                    {"force_residual", a.force_residual}});
  return {{"suite", "ablation"}, {"arms", arms}};
}

nlohmann::json report_json(const ConsistencyReport& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : r.rows)
    rows.push_back({{"name", row.name},
                    {"calib_loss", row.calib_loss},
                    {"infer_loss", row.infer_loss},
                    {"gap", row.gap},
                    {"representation_bit_equal", row.representation_bit_equal},
                    {"force_confirmed", row.force_confirmed}});
  return {{"suite", "consistency"}, {"rows", rows}};
}

nlohmann::json report_json(const HistogramReport& r) {
  return {{"suite", "histogram"},
          {"bin_width", 0.05},
          {"subvector_count", r.subvector_count},
          {"epochs", r.epochs}};
}

nlohmann::json report_json(const OutlierReport& r) {
  return {{"suite", "rtn-vs-vq"},
          {"mse_rtn", r.mse_rtn},
          {"mse_kmeans", r.mse_kmeans},
          {"mse_vimvq", r.mse_vimvq}};
}

nlohmann::json report_json(const SsmReport& r) {
  return {{"suite", "ssm"},
          {"max_duality_rel_error", r.max_duality_rel_error},
          {"heldout_output_mse", r.heldout_output_mse},
          {"calib_loss", r.calib_loss},
          {"infer_loss", r.infer_loss}};
}

std::string report_csv(const AblationReport& r) {
  std::ostringstream os;
  os << "arm,infer_loss,calib_loss,truncation,force_residual\n";
  for (const auto& a : r.arms)
    os << a.name << ',' << a.infer_loss << ',' << a.calib_loss << ',' << a.truncation << ','
       << a.force_residual << '\n';
  return os.str();
}

std::string report_csv(const ConsistencyReport& r) {
  std::ostringstream os;
  os << "mode,calib_loss,infer_loss,gap,bit_equal,force_confirmed\n";
  for (const auto& row : r.rows)
    os << row.name << ',' << row.calib_loss << ',' << row.infer_loss << ',' << row.gap << ','
       << (row.representation_bit_equal ? 1 : 0) << ',' << row.force_confirmed << '\n';
  return os.str();
}

std::string report_csv(const HistogramReport& r) {
  std::ostringstream os;
  os << "epoch";
  for (Index b = 0; b < kHistogramBins; ++b) os << ",bin_" << (0.05 * static_cast<double>(b));
  os << '\n';
  for (std::size_t e = 0; e < r.epochs.size(); ++e) {
    os << e;
    for (const auto v : r.epochs[e]) os << ',' << v;
    os << '\n';
  }
  return os.str();
}

std::string report_csv(const OutlierReport& r) {
  std::ostringstream os;
  os << "mse_rtn,mse_kmeans,mse_vimvq\n"
     << r.mse_rtn << ',' << r.mse_kmeans << ',' << r.mse_vimvq << '\n';
  return os.str();
}

std::string report_csv(const SsmReport& r) {
  std::ostringstream os;
  os << "max_duality_rel_error,heldout_output_mse,calib_loss,infer_loss\n"
     << r.max_duality_rel_error << ',' << r.heldout_output_mse << ',' << r.calib_loss << ','
     << r.infer_loss << '\n';
  return os.str();
}

}  // namespace vq

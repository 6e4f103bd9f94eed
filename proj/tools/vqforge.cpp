#include "vq/bytes.hpp"
#include "vq/harness.hpp"
#include "vq/kmeans.hpp"
#include "vq/synthetic.hpp"
#include "vq/packfmt.hpp"
#include "vq/qinfer.hpp"
#include "vq/rng.hpp"
#include "vq/weight_io.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <fstream>
#include <iostream>

namespace {

using json = nlohmann::json;

json matrix_json(const vq::MatF& m) {
  json rows = json::array();
  for (vq::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (vq::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

json indices_json(const vq::IndexMat& m) {
  json rows = json::array();
  for (vq::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (vq::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

void preset_shape(int bits, vq::Index& k, vq::Index& d) {
  switch (bits) {
    case 3: k = 64; d = 2; break;
    case 2: k = 256; d = 4; break;
    case 1: k = 256; d = 8; break;
    default: throw vq::ContractError("bits must be 1, 2, or 3");
  }
}

int cmd_kmeans(const std::string& path, vq::Index k, vq::Index d, std::uint64_t seed,
               vq::Index iters) {
  const vq::ModelBundle bundle = vq::load_bundle(path);
  json layers = json::array();
  for (const auto& layer : bundle.layers) {
    const vq::SubVectorTable table = vq::partition(layer, d);
    vq::Codebook seeded = vq::kmeanspp_seed(table, k, seed);
    const vq::LloydResult res = vq::lloyd(table, std::move(seeded), iters, 1e-6);
    layers.push_back({{"name", layer.name},
                      {"rows", layer.rows()},
                      {"cols", layer.cols()},
                      {"d", d},
                      {"k", k},
                      {"iterations", res.iterations},
                      {"distortion", res.distortion},
                      {"codebook", matrix_json(res.codebook.entries)},
                      {"assignments", indices_json(res.assignments.indices)}});
  }
  std::cout << json({{"layers", layers}}).dump(2) << "\n";
  return 0;
}

int cmd_calibrate(const std::string& path, int bits, double tau, double lambda,
                  vq::Index epochs, bool no_replacement, bool no_incremental,
                  std::uint64_t seed, const std::string& out, vq::Index samples,
                  vq::Index candidates, vq::Index init_steps) {
  vq::Index k = 0, d = 0;
  preset_shape(bits, k, d);

  const vq::ModelBundle bundle = vq::load_bundle(path);
  vq::LinearProbeAdapter adapter(bundle);

  vq::SplitMix64 rng(seed);
  vq::MatF inputs(samples, adapter.input_width());
  for (vq::Index r = 0; r < inputs.rows(); ++r)
    for (vq::Index c = 0; c < inputs.cols(); ++c) inputs(r, c) = rng.next_normal_f();
  std::vector<vq::MatF> fp;
  for (const auto& layer : bundle.layers) fp.push_back(layer.values);
  const vq::MatF targets = adapter.forward(inputs, fp).outputs;

  vq::ConvexConfig ccfg;
  ccfg.candidates = candidates;
  ccfg.replace_threshold = static_cast<float>(lambda);
  ccfg.init_steps = init_steps;

  vq::CalibConfig cfg;
  cfg.tau = tau;
  cfg.max_epochs = epochs;
  cfg.enable_replacement = !no_replacement;
  cfg.enable_incremental = !no_incremental;
  cfg.seed = seed;

  const vq::CalibResult res =
      vq::calibrate(bundle, adapter, inputs, targets, d, k, ccfg, cfg);

  vq::PackedModel model;
  for (std::size_t l = 0; l < bundle.layers.size(); ++l)
    model.layers.push_back(
        vq::pack_layer(bundle.layers[l].name, res.codebooks[l], res.assignments[l]));
  vq::write_vqm(model, out);

  json report = vq::report_json(res.report);
  report["bits"] = bits;
  report["k"] = k;
  report["d"] = d;
  report["out"] = out;
  std::cout << report.dump(2) << "\n";
  return 0;
}

int cmd_synth(vq::Index layers, vq::Index rows, vq::Index cols, double sigma, double fraction,
              double scale, std::uint64_t seed, const std::string& out) {
  vq::SplitMix64 rng(seed);
  vq::ModelBundle bundle;
  bundle.metadata["source"] = "vqforge synth";
  for (vq::Index l = 0; l < layers; ++l) {
    vq::SyntheticSpec spec;
    spec.rows = rows;
    spec.cols = cols;
    spec.sigma = sigma;
    spec.outlier_fraction = fraction;
    spec.outlier_scale = scale;
    spec.seed = rng.next_u64();
    bundle.layers.push_back(vq::gen_weights(spec, "layer" + std::to_string(l)));
  }
  vq::save_bundle(bundle, out);
  std::cout << "wrote " << out << " (" << layers << " layers of " << rows << "x" << cols
            << ")\n";
  return 0;
}

int cmd_pack_info(const std::string& path) {
  const vq::PackedModel model = vq::read_vqm(path);
  std::uint64_t total_payload = 0, total_weights = 0;
  std::printf("%-24s %7s %7s %4s %5s %12s %14s %14s\n", "layer", "o", "i", "d", "k",
              "bits/weight", "codebook B", "assignments B");
  for (const auto& layer : model.layers) {
    const auto rate = vq::bitrate(layer.rows, layer.cols, layer.subdim, layer.codewords);
    const std::uint64_t cb_bytes = rate.codebook_bits / 8;
    const std::uint64_t as_bytes = layer.bits.size();
    total_payload += cb_bytes + as_bytes;
    total_weights += static_cast<std::uint64_t>(layer.rows) * layer.cols;
    std::printf("%-24s %7u %7u %4u %5u %12.4f %14llu %14llu\n", layer.name.c_str(),
                layer.rows, layer.cols, layer.subdim, layer.codewords, rate.bits_per_weight,
                static_cast<unsigned long long>(cb_bytes),
                static_cast<unsigned long long>(as_bytes));
  }
  std::printf("total payload: %llu bytes for %llu weights (%.4f bits/weight incl. codebooks)\n",
              static_cast<unsigned long long>(total_payload),
              static_cast<unsigned long long>(total_weights),
              total_weights ? 8.0 * static_cast<double>(total_payload) /
                                  static_cast<double>(total_weights)
                            : 0.0);
  return 0;
}

int cmd_infer(const std::string& path, const std::string& input_path, bool bench) {
  const vq::PackedModel model = vq::read_vqm(path);
  const std::vector<std::uint8_t> raw = vq::read_file(input_path);
  if (raw.size() % 4 != 0) throw vq::FormatError("input file size is not a multiple of 4");
  const std::size_t n_floats = raw.size() / 4;

  std::size_t want = 0;
  for (const auto& layer : model.layers) want += layer.cols;
  if (n_floats != want)
    throw vq::ContractError("input file holds " + std::to_string(n_floats) +
                            " f32 values; expected " + std::to_string(want) +
                            " (the concatenated layer input widths)");

  const float* data = reinterpret_cast<const float*>(raw.data());
  std::size_t offset = 0;
  for (const auto& layer : model.layers) {
    Eigen::Map<const vq::VecF> x(data + offset, layer.cols);
    offset += layer.cols;
    const vq::VecF y = vq::qmatvec(layer, x);
    std::cout << layer.name << ":";
    for (vq::Index r = 0; r < y.size(); ++r) std::cout << ' ' << y[r];
    std::cout << "\n";

    if (bench) {
      using clock = std::chrono::steady_clock;
      const int reps = 25;
      const vq::MatF dense = vq::decode(layer);

      auto t0 = clock::now();
      vq::VecF yd;
      for (int rep = 0; rep < reps; ++rep) yd = dense * x;
      auto t1 = clock::now();
      vq::VecF yq;
      for (int rep = 0; rep < reps; ++rep) yq = vq::qmatvec(layer, x);
      auto t2 = clock::now();

      const double us_dense =
          std::chrono::duration<double, std::micro>(t1 - t0).count() / reps;
      const double us_fly =
          std::chrono::duration<double, std::micro>(t2 - t1).count() / reps;
      std::cout << "  timing: dense " << us_dense << " us/matvec, decode-on-the-fly "
                << us_fly << " us/matvec (" << reps << " reps, dense excludes one-time decode)"
                << "\n";
      (void)yd;
      (void)yq;
    }
  }
  return 0;
}

int cmd_bench(const std::string& suite, std::uint64_t seed, const std::string& out,
              const std::string& csv) {
  json report;
  std::string csv_text;
  if (suite == "ablation") {
    const auto r = vq::run_ablation(seed);
    report = vq::report_json(r);
    csv_text = vq::report_csv(r);
  } else if (suite == "consistency") {
    const auto r = vq::run_consistency(seed);
    report = vq::report_json(r);
    csv_text = vq::report_csv(r);
  } else if (suite == "histogram") {
    const auto r = vq::run_histogram(seed);
    report = vq::report_json(r);
    csv_text = vq::report_csv(r);
  } else if (suite == "rtn-vs-vq") {
    const auto r = vq::run_rtn_vs_vq(seed);
    report = vq::report_json(r);
    csv_text = vq::report_csv(r);
  } else if (suite == "ssm") {
    const auto r = vq::run_ssm(seed);
    report = vq::report_json(r);
    csv_text = vq::report_csv(r);
  } else {
    throw vq::ContractError("unknown suite '" + suite + "'");
  }
  report["seed"] = seed;

  if (out.empty()) {
    std::cout << report.dump(2) << "\n";
  } else {
    std::ofstream f(out);
    if (!f) throw vq::IoError("cannot open '" + out + "' for writing");
    f << report.dump(2) << "\n";
    std::cout << "wrote " << out << "\n";
  }
  if (!csv.empty()) {
    std::ofstream f(csv);
    if (!f) throw vq::IoError("cannot open '" + csv + "' for writing");
    f << csv_text;
    std::cout << "wrote " << csv << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"vqforge: codebook quantization toolkit"};
  app.require_subcommand(1);

  // kmeans
  auto* kmeans = app.add_subcommand("kmeans", "cluster a WTS bundle into codebooks");
  std::string km_path;
  vq::Index km_k = 256, km_d = 4, km_iters = 100;
  std::uint64_t km_seed = 1;
  kmeans->add_option("wts", km_path, "input WTS file")->required();
  kmeans->add_option("--k", km_k, "codeword count (power of two)");
  kmeans->add_option("--d", km_d, "sub-vector length");
  kmeans->add_option("--seed", km_seed, "seeding RNG seed");
  kmeans->add_option("--iters", km_iters, "max Lloyd iterations");

  // calibrate
  auto* calib = app.add_subcommand("calibrate", "quantize a WTS bundle with calibration");
  std::string cl_path, cl_out = "model.vqm";
  int cl_bits = 2;
  double cl_tau = 0.99, cl_lambda = 1e-2;
  vq::Index cl_epochs = 32, cl_samples = 2048, cl_candidates = 4, cl_init_steps = 100;
  bool cl_no_replacement = false, cl_no_incremental = false;
  std::uint64_t cl_seed = 1;
  calib->add_option("wts", cl_path, "input WTS file")->required();
  calib->add_option("--bits", cl_bits, "preset: 3 (64x2), 2 (256x4), 1 (256x8)");
  calib->add_option("--tau", cl_tau, "confirmation threshold");
  calib->add_option("--lambda", cl_lambda, "candidate replacement threshold");
  calib->add_option("--epochs", cl_epochs, "max calibration epochs");
  calib->add_flag("--no-replacement", cl_no_replacement, "disable candidate replacement");
  calib->add_flag("--no-incremental", cl_no_incremental, "disable incremental confirmation");
  calib->add_option("--seed", cl_seed, "RNG seed");
  calib->add_option("--out", cl_out, "output VQM path");
  calib->add_option("--samples", cl_samples, "calibration sample count");
  calib->add_option("--candidates", cl_candidates, "candidates per sub-vector");
  calib->add_option("--init-steps", cl_init_steps, "reconstruction warmup steps");

  // synth
  auto* synth = app.add_subcommand("synth", "generate an outlier-heavy synthetic WTS bundle");
  std::string sy_out = "weights.wts";
  vq::Index sy_layers = 2, sy_rows = 128, sy_cols = 128;
  double sy_sigma = 0.05, sy_fraction = 0.01, sy_scale = 20.0;
  std::uint64_t sy_seed = 1;
  synth->add_option("--layers", sy_layers, "layer count");
  synth->add_option("--rows", sy_rows, "rows per layer");
  synth->add_option("--cols", sy_cols, "cols per layer");
  synth->add_option("--sigma", sy_sigma, "base Gaussian sigma");
  synth->add_option("--outlier-fraction", sy_fraction, "fraction of scaled entries [0, 0.1]");
  synth->add_option("--outlier-scale", sy_scale, "outlier multiplier");
  synth->add_option("--seed", sy_seed, "RNG seed");
  synth->add_option("--out", sy_out, "output WTS path");

  // pack-info
  auto* info = app.add_subcommand("pack-info", "show storage accounting of a VQM file");
  std::string pi_path;
  info->add_option("vqm", pi_path, "input VQM file")->required();

  // infer
  auto* infer = app.add_subcommand("infer", "run packed inference on raw f32 input");
  std::string in_path, in_input;
  bool in_bench = false;
  infer->add_option("vqm", in_path, "input VQM file")->required();
  infer->add_option("--input", in_input, "raw little-endian f32 file")->required();
  infer->add_flag("--bench", in_bench, "time dense vs decode-on-the-fly matvec");

  // bench
  auto* bench = app.add_subcommand("bench", "run an experiment suite");
  std::string be_suite, be_out, be_csv;
  std::uint64_t be_seed = 7;
  bench->add_option("--suite", be_suite, "ablation|consistency|histogram|ssm|rtn-vs-vq")
      ->required();
  bench->add_option("--seed", be_seed, "experiment seed");
  bench->add_option("--out", be_out, "write JSON report here (default stdout)");
  bench->add_option("--csv", be_csv, "also write a CSV rendering here");

  CLI11_PARSE(app, argc, argv);

  try {
    if (kmeans->parsed()) return cmd_kmeans(km_path, km_k, km_d, km_seed, km_iters);
    if (calib->parsed())
      return cmd_calibrate(cl_path, cl_bits, cl_tau, cl_lambda, cl_epochs, cl_no_replacement,
                           cl_no_incremental, cl_seed, cl_out, cl_samples, cl_candidates,
                           cl_init_steps);
    if (synth->parsed())
      return cmd_synth(sy_layers, sy_rows, sy_cols, sy_sigma, sy_fraction, sy_scale, sy_seed,
                       sy_out);
    if (info->parsed()) return cmd_pack_info(pi_path);
    if (infer->parsed()) return cmd_infer(in_path, in_input, in_bench);
    if (bench->parsed()) return cmd_bench(be_suite, be_seed, be_out, be_csv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

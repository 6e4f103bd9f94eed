#include "vq/weight_io.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

int main(int argc, char** argv) {
  CLI::App app{"weights: inspect WTS weight bundles"};
  app.require_subcommand(1);

  auto* inspect = app.add_subcommand("inspect", "print per-layer shape and value statistics");
  std::string path;
  inspect->add_option("path", path, "input WTS file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    const vq::ModelBundle bundle = vq::load_bundle(path);
    std::printf("%-24s %7s %7s %12s %12s %12s %12s %9s\n", "layer", "o", "i", "min", "max",
                "mean", "std", "outliers");
    for (const auto& layer : bundle.layers) {
      const vq::LayerStats st = vq::layer_stats(layer);
      std::printf("%-24s %7lld %7lld %12.6g %12.6g %12.6g %12.6g %9lld\n", st.name.c_str(),
                  static_cast<long long>(st.rows), static_cast<long long>(st.cols), st.min,
                  st.max, st.mean, st.stddev, static_cast<long long>(st.outliers));
    }
    std::printf("%zu layers (outliers = entries beyond 6 standard deviations)\n",
                bundle.layers.size());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

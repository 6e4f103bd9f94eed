#include "vq/weight_io.hpp"

#include "vq/bytes.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

namespace vq {

namespace {
constexpr char kMagic[4] = {'W', 'T', 'S', '1'};
}

std::vector<std::uint8_t> encode_bundle(const ModelBundle& bundle) {
  validate(bundle);
  ByteWriter out;
  out.raw(kMagic, 4);
  out.u32(static_cast<std::uint32_t>(bundle.layers.size()));
  for (const auto& layer : bundle.layers) {
    if (layer.name.size() > 0xFFFF)
      throw ContractError("layer name longer than 65535 bytes: '" + layer.name + "'");
    out.u16(static_cast<std::uint16_t>(layer.name.size()));
    out.raw(layer.name.data(), layer.name.size());
    out.u32(static_cast<std::uint32_t>(layer.rows()));
    out.u32(static_cast<std::uint32_t>(layer.cols()));
    out.f32_row_major(layer.values);
  }
  out.u32(out.crc32_all());
  return std::move(out).take();
}

ModelBundle decode_bundle(const std::vector<std::uint8_t>& bytes) {
  ByteReader in(bytes);
  char magic[4];
  in.raw(magic, 4, "WTS header");
  if (std::memcmp(magic, kMagic, 4) != 0) throw FormatError("bad WTS magic");
  const std::uint32_t layer_count = in.u32("WTS layer count");

  ModelBundle bundle;
  bundle.layers.reserve(layer_count);
  for (std::uint32_t l = 0; l < layer_count; ++l) {
    WeightMatrix w;
    const std::uint16_t name_len = in.u16("layer name length");
    w.name = in.str(name_len, "layer name");
    const std::uint32_t o = in.u32("layer rows");
    const std::uint32_t i = in.u32("layer cols");
    if (o == 0 || i == 0) throw FormatError("layer '" + w.name + "' has zero dimension");
    w.values.resize(o, i);
    in.f32_row_major(w.values, "layer '" + w.name + "' payload");
    bundle.layers.push_back(std::move(w));
  }

  const std::uint32_t stored_crc = in.u32("trailing CRC32");
  if (!in.exhausted()) throw FormatError("trailing bytes after WTS CRC");
  const std::uint32_t computed = in.crc32_prefix(bytes.size() - 4);
  if (stored_crc != computed) throw CorruptionError("WTS CRC32 mismatch");

  for (const auto& layer : bundle.layers)
    if (!layer.values.allFinite())
      throw DataError("layer '" + layer.name + "' contains non-finite values");
  validate(bundle);
  return bundle;
}

ModelBundle load_bundle(const std::string& path) { return decode_bundle(read_file(path)); }

void save_bundle(const ModelBundle& bundle, const std::string& path) {
  write_file(path, encode_bundle(bundle));
}

LayerStats layer_stats(const WeightMatrix& w) {
  LayerStats st;
  st.name = w.name;
  st.rows = w.rows();
  st.cols = w.cols();
  const auto& v = w.values;
  st.min = v.minCoeff();
  st.max = v.maxCoeff();
  const double n = static_cast<double>(v.size());
  double sum = 0, sumsq = 0;
  for (Index r = 0; r < v.rows(); ++r)
    for (Index c = 0; c < v.cols(); ++c) {
      const double x = v(r, c);
      sum += x;
      sumsq += x * x;
    }
  st.mean = sum / n;
  st.stddev = std::sqrt(std::max(0.0, sumsq / n - st.mean * st.mean));
  const double band = 6.0 * st.stddev;
  for (Index r = 0; r < v.rows(); ++r)
    for (Index c = 0; c < v.cols(); ++c)
      if (std::abs(v(r, c) - st.mean) > band) ++st.outliers;
  return st;
}

}  // namespace vq

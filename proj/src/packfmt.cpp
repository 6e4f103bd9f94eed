#include "vq/packfmt.hpp"

#include "vq/bytes.hpp"

#include <cstring>

namespace vq {

Bitrate bitrate(Index o, Index i, Index d, Index k) {
  if (o <= 0 || i <= 0 || d <= 0) throw ContractError("bitrate: dimensions must be positive");
  if (i % d != 0) throw ContractError("bitrate: d does not divide i");
  const int b = log2_exact(static_cast<std::uint64_t>(k));
  Bitrate r;
  r.bits_per_weight = static_cast<double>(b) / static_cast<double>(d);
  r.assignment_bits = static_cast<std::uint64_t>(o) * static_cast<std::uint64_t>(i) /
                      static_cast<std::uint64_t>(d) * static_cast<std::uint64_t>(b);
  r.codebook_bits = static_cast<std::uint64_t>(k) * static_cast<std::uint64_t>(d) * 32ull;
  return r;
}

std::size_t packed_size(Index count, Index k) {
  const int b = log2_exact(static_cast<std::uint64_t>(k));
  return (static_cast<std::size_t>(count) * static_cast<std::size_t>(b) + 7) / 8;
}

std::vector<std::uint8_t> pack_indices(std::span<const std::int32_t> indices, Index k) {
  const int b = log2_exact(static_cast<std::uint64_t>(k));
  std::vector<std::uint8_t> out(packed_size(static_cast<Index>(indices.size()), k), 0);
  std::size_t bitpos = 0;
  for (const std::int32_t idx : indices) {
    if (idx < 0 || idx >= k)
      throw ContractError("pack: index " + std::to_string(idx) + " out of range [0, " +
                          std::to_string(k) + ")");
    const std::uint32_t v = static_cast<std::uint32_t>(idx);
    for (int bit = 0; bit < b; ++bit, ++bitpos)
      out[bitpos >> 3] |= static_cast<std::uint8_t>(((v >> bit) & 1u) << (bitpos & 7));
  }
  return out;
}

std::vector<std::int32_t> unpack_indices(std::span<const std::uint8_t> bytes, Index count,
                                         Index k) {
  const int b = log2_exact(static_cast<std::uint64_t>(k));
  const std::size_t expected = packed_size(count, k);
  if (bytes.size() < expected) throw FormatError("unpack: bitstream shorter than index count");
  if (bytes.size() > expected) throw FormatError("unpack: bitstream longer than index count");

  std::vector<std::int32_t> out(static_cast<std::size_t>(count));
  std::size_t bitpos = 0;
  for (Index t = 0; t < count; ++t) {
    std::uint32_t v = 0;
    for (int bit = 0; bit < b; ++bit, ++bitpos)
      v |= static_cast<std::uint32_t>((bytes[bitpos >> 3] >> (bitpos & 7)) & 1u) << bit;
    out[static_cast<std::size_t>(t)] = static_cast<std::int32_t>(v);
  }
  // Strict reader: padding bits up to the byte boundary must be zero.
  for (; bitpos < expected * 8; ++bitpos)
    if ((bytes[bitpos >> 3] >> (bitpos & 7)) & 1u)
      throw FormatError("unpack: nonzero padding bits");
  return out;
}

std::vector<std::uint8_t> pack(const Assignments& a, Index k) {
  return pack_indices(std::span<const std::int32_t>(a.indices.data(),
                                                    static_cast<std::size_t>(a.indices.size())),
                      k);
}

Assignments unpack(std::span<const std::uint8_t> bytes, Index rows, Index slots, Index k) {
  const auto flat = unpack_indices(bytes, rows * slots, k);
  Assignments a;
  a.indices.resize(rows, slots);
  std::memcpy(a.indices.data(), flat.data(), flat.size() * sizeof(std::int32_t));
  return a;
}

PackedLayer pack_layer(const std::string& name, const Codebook& cb, const Assignments& a) {
  validate(cb);
  validate(a, cb.size());
  PackedLayer layer;
  layer.name = name;
  layer.rows = static_cast<std::uint32_t>(a.rows());
  layer.cols = static_cast<std::uint32_t>(a.slots() * cb.dim());
  layer.subdim = static_cast<std::uint16_t>(cb.dim());
  layer.codewords = static_cast<std::uint32_t>(cb.size());
  layer.codebook = cb.entries;
  layer.bits = pack(a, cb.size());
  return layer;
}

namespace {
constexpr char kMagic[4] = {'V', 'Q', 'M', '1'};
}

std::vector<std::uint8_t> encode_vqm(const PackedModel& model) {
  {
    std::map<std::string, int> seen;
    for (const auto& layer : model.layers)
      if (++seen[layer.name] > 1)
        throw ContractError("duplicate layer name '" + layer.name + "' in packed model");
  }
  ByteWriter out;
  out.raw(kMagic, 4);
  out.u32(static_cast<std::uint32_t>(model.layers.size()));
  for (const auto& layer : model.layers) {
    if (layer.name.size() > 0xFFFF) throw ContractError("layer name too long");
    const std::size_t layer_begin = out.size();
    out.u16(static_cast<std::uint16_t>(layer.name.size()));
    out.raw(layer.name.data(), layer.name.size());
    out.u32(layer.rows);
    out.u32(layer.cols);
    out.u16(layer.subdim);
    out.u32(layer.codewords);
    out.f32_row_major(layer.codebook);
    out.raw(layer.bits.data(), layer.bits.size());
    out.u32(out.crc32_range(layer_begin, out.size()));
  }
  return std::move(out).take();
}

PackedModel decode_vqm(const std::vector<std::uint8_t>& bytes) {
  ByteReader in(bytes);
  char magic[4];
  in.raw(magic, 4, "VQM header");
  if (std::memcmp(magic, kMagic, 4) != 0) throw FormatError("bad VQM magic");
  const std::uint32_t layer_count = in.u32("VQM layer count");

  PackedModel model;
  model.layers.reserve(layer_count);
  for (std::uint32_t l = 0; l < layer_count; ++l) {
    const std::size_t layer_begin = in.pos();
    PackedLayer layer;
    const std::uint16_t name_len = in.u16("layer name length");
    layer.name = in.str(name_len, "layer name");
    layer.rows = in.u32("layer rows");
    layer.cols = in.u32("layer cols");
    layer.subdim = in.u16("layer sub-vector length");
    layer.codewords = in.u32("layer codeword count");
    if (layer.rows == 0 || layer.cols == 0 || layer.subdim == 0)
      throw FormatError("layer '" + layer.name + "' has zero dimension");
    if (layer.cols % layer.subdim != 0)
      throw FormatError("layer '" + layer.name + "': d does not divide i");
    if (!is_power_of_two(layer.codewords))
      throw FormatError("layer '" + layer.name + "': k is not a power of two");

    layer.codebook.resize(layer.codewords, layer.subdim);
    in.f32_row_major(layer.codebook, "layer '" + layer.name + "' codebook");
    layer.bits.resize(packed_size(layer.subvector_count(), layer.codewords));
    in.raw(layer.bits.data(), layer.bits.size(), "layer bitstream");

    const std::uint32_t stored_crc = in.u32("layer CRC32");
    const std::uint32_t computed = in.crc32_range(layer_begin, in.pos() - 4);
    if (stored_crc != computed)
      throw CorruptionError("layer '" + layer.name + "' CRC32 mismatch");
    if (!layer.codebook.allFinite())
      throw DataError("layer '" + layer.name + "' codebook has non-finite entries");

    // Reject nonzero padding early; the kernels assume a writer-produced stream.
    (void)unpack_indices(layer.bits, layer.subvector_count(), layer.codewords);
    model.layers.push_back(std::move(layer));
  }
  if (!in.exhausted()) throw FormatError("trailing bytes after last VQM layer");
  {
    std::map<std::string, int> seen;
    for (const auto& layer : model.layers)
      if (++seen[layer.name] > 1) throw FormatError("duplicate layer name in VQM file");
  }
  return model;
}

void write_vqm(const PackedModel& model, const std::string& path) {
  write_file(path, encode_vqm(model));
}

PackedModel read_vqm(const std::string& path) { return decode_vqm(read_file(path)); }

}  // namespace vq

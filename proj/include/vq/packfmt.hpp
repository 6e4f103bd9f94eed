#pragma once

#include "vq/types.hpp"

#include <span>
#include <string>
#include <vector>

namespace vq {

/// Storage accounting for one layer quantized with a k x d codebook.
struct Bitrate {
  double bits_per_weight = 0;       // log2(k) / d
  std::uint64_t assignment_bits = 0;  // (o*i/d) * log2(k)
  std::uint64_t codebook_bits = 0;    // k * d * 32
};

Bitrate bitrate(Index o, Index i, Index d, Index k);

/// Number of bytes a packed stream of `count` indices at log2(k) bits takes.
std::size_t packed_size(Index count, Index k);

// Assignment bit-packing: log2(k) bits per index, LSB-first within each
// byte, indices in row-major order, zero padding to the byte boundary.
std::vector<std::uint8_t> pack_indices(std::span<const std::int32_t> indices, Index k);
std::vector<std::int32_t> unpack_indices(std::span<const std::uint8_t> bytes, Index count,
                                         Index k);

std::vector<std::uint8_t> pack(const Assignments& a, Index k);
Assignments unpack(std::span<const std::uint8_t> bytes, Index rows, Index slots, Index k);

/// One serialized layer: codebook plus bit-packed assignments.
struct PackedLayer {
  std::string name;
  std::uint32_t rows = 0;      // o
  std::uint32_t cols = 0;      // i
  std::uint16_t subdim = 0;    // d
  std::uint32_t codewords = 0; // k
  MatF codebook;               // k x d
  std::vector<std::uint8_t> bits;

  Index slots() const { return cols / subdim; }
  Index subvector_count() const { return static_cast<Index>(rows) * slots(); }
};

struct PackedModel {
  std::vector<PackedLayer> layers;
};

PackedLayer pack_layer(const std::string& name, const Codebook& cb, const Assignments& a);

// VQM container (little-endian):
//   magic "VQM1" | u32 layer count
//   per layer: u16 name length | name | u32 o | u32 i | u16 d | u32 k
//              | k*d f32 codebook row-major | packed bitstream
//              | u32 CRC32 over that layer's bytes
void write_vqm(const PackedModel& model, const std::string& path);
PackedModel read_vqm(const std::string& path);

std::vector<std::uint8_t> encode_vqm(const PackedModel& model);
PackedModel decode_vqm(const std::vector<std::uint8_t>& bytes);

}  // namespace vq

#include "vq/qinfer.hpp"

namespace vq {

namespace {

// Sequential LSB-first bit cursor over a packed assignment stream.
struct BitCursor {
  const std::uint8_t* data;
  std::size_t bitpos = 0;

  std::uint32_t read(int bits) {
    std::uint32_t v = 0;
    for (int b = 0; b < bits; ++b, ++bitpos)
      v |= static_cast<std::uint32_t>((data[bitpos >> 3] >> (bitpos & 7)) & 1u) << b;
    return v;
  }

  void seek(std::size_t bit) { bitpos = bit; }
};

}  // namespace

MatF decode(const PackedLayer& layer) {
  const int b = log2_exact(layer.codewords);
  const Index d = layer.subdim;
  MatF out(layer.rows, layer.cols);
  Eigen::Map<MatF> rows(out.data(), layer.subvector_count(), d);
  BitCursor cur{layer.bits.data()};
  for (Index t = 0; t < layer.subvector_count(); ++t)
    rows.row(t) = layer.codebook.row(static_cast<Index>(cur.read(b)));
  return out;
}

VecF qmatvec(const PackedLayer& layer, const Eigen::Ref<const VecF>& x) {
  if (x.size() != static_cast<Index>(layer.cols))
    throw ContractError("qmatvec: input length " + std::to_string(x.size()) +
                        " does not match layer width " + std::to_string(layer.cols));
  const int b = log2_exact(layer.codewords);
  const Index d = layer.subdim;
  const Index slots = layer.slots();
  const float* cb = layer.codebook.data();  // hot contiguous k x d table

  VecF y(layer.rows);
  BitCursor cur{layer.bits.data()};
  const std::size_t row_bits = static_cast<std::size_t>(slots) * static_cast<std::size_t>(b);
  for (Index r = 0; r < static_cast<Index>(layer.rows); ++r) {
    cur.seek(static_cast<std::size_t>(r) * row_bits);
    double acc = 0;
    for (Index s = 0; s < slots; ++s) {
      const float* cw = cb + static_cast<std::size_t>(cur.read(b)) * d;
      const float* xs = x.data() + s * d;
      for (Index j = 0; j < d; ++j)
        acc += static_cast<double>(cw[j]) * static_cast<double>(xs[j]);
    }
    y[r] = static_cast<float>(acc);
  }
  return y;
}

MatF qmatmul(const PackedLayer& layer, const Eigen::Ref<const MatF>& x) {
  if (x.rows() != static_cast<Index>(layer.cols))
    throw ContractError("qmatmul: input rows " + std::to_string(x.rows()) +
                        " do not match layer width " + std::to_string(layer.cols));
  MatF y(layer.rows, x.cols());
  for (Index c = 0; c < x.cols(); ++c) y.col(c) = qmatvec(layer, x.col(c));
  return y;
}

}  // namespace vq

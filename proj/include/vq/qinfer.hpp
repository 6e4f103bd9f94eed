#pragma once

#include "vq/packfmt.hpp"
#include "vq/types.hpp"

namespace vq {

/// Dense o x i reconstruction: sub-vector slot (r, s) is a verbatim copy of
/// the codeword its packed assignment names. Reads the bitstream directly.
MatF decode(const PackedLayer& layer);

/// y = decode(layer) * x without materializing the dense matrix: per (row,
/// slot) the kernel reads log2(k) bits, gathers the codeword, and
/// multiply-accumulates against the matching input slice in a double
/// accumulator, casting to f32 at the end.
VecF qmatvec(const PackedLayer& layer, const Eigen::Ref<const VecF>& x);

/// Column-wise batched variant: (o x i) * (i x b).
MatF qmatmul(const PackedLayer& layer, const Eigen::Ref<const MatF>& x);

}  // namespace vq

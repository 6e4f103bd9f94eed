#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace vq {

using Index = Eigen::Index;

// Dense storage is row-major throughout: a weight row is contiguous, so the
// sub-vector (r, s) of a partitioned matrix is a contiguous slice of memory.
template <class Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using MatF = Mat<float>;
using VecF = Vec<float>;
using MatD = Mat<double>;
using VecD = Vec<double>;
using IndexMat = Eigen::Matrix<std::int32_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using IndexVec = Eigen::Matrix<std::int32_t, Eigen::Dynamic, 1>;

// Error taxonomy. All file readers are strict: anything the writer could not
// have produced is rejected with one of these.
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct CorruptionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ContractError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

constexpr bool is_power_of_two(std::uint64_t v) { return v != 0 && (v & (v - 1)) == 0; }

// log2 of an exact power of two.
inline int log2_exact(std::uint64_t v) {
  if (!is_power_of_two(v)) throw ContractError("log2_exact: value is not a power of two");
  int b = 0;
  while ((v >>= 1) != 0) ++b;
  return b;
}

/// A named dense o x i weight matrix, the unit of quantization input.
struct WeightMatrix {
  std::string name;
  MatF values;  // o x i, row-major

  Index rows() const { return values.rows(); }
  Index cols() const { return values.cols(); }
};

inline void validate(const WeightMatrix& w) {
  if (w.rows() <= 0 || w.cols() <= 0)
    throw ContractError("weight matrix '" + w.name + "' has empty shape");
  if (!w.values.allFinite())
    throw DataError("weight matrix '" + w.name + "' contains non-finite values");
}

/// An ordered collection of weight matrices plus free-form metadata.
/// Metadata is in-memory only; the WTS container persists layers.
struct ModelBundle {
  std::vector<WeightMatrix> layers;
  std::map<std::string, std::string> metadata;
};

inline void validate(const ModelBundle& b) {
  std::map<std::string, int> seen;
  for (const auto& layer : b.layers) {
    validate(layer);
    if (++seen[layer.name] > 1)
      throw ContractError("duplicate layer name '" + layer.name + "' in bundle");
  }
}

/// Zero-copy view of a weight matrix as o*i/d sub-vectors of length d.
/// Sub-vector (r, s) is columns [s*d, (s+1)*d) of row r; flat order is
/// row-major over (r, s), so as_matrix() is a plain reinterpretation of the
/// underlying buffer. The source matrix must outlive the table.
class SubVectorTable {
 public:
  SubVectorTable(const WeightMatrix& w, Index d) : src_(&w), dim_(d) {
    if (d <= 0) throw ContractError("sub-vector length must be positive");
    if (w.cols() % d != 0)
      throw ContractError("sub-vector length " + std::to_string(d) +
                          " does not divide layer width " + std::to_string(w.cols()) +
                          " for layer '" + w.name + "'");
  }

  Index dim() const { return dim_; }
  Index rows() const { return src_->rows(); }
  Index slots() const { return src_->cols() / dim_; }
  Index count() const { return rows() * slots(); }
  Index flat(Index r, Index s) const { return r * slots() + s; }
  const WeightMatrix& source() const { return *src_; }

  /// The count() x dim() matrix whose row t is sub-vector t.
  Eigen::Map<const MatF> as_matrix() const {
    return Eigen::Map<const MatF>(src_->values.data(), count(), dim_);
  }

  auto subvec(Index r, Index s) const { return as_matrix().row(flat(r, s)); }
  auto subvec(Index t) const { return as_matrix().row(t); }

 private:
  const WeightMatrix* src_;
  Index dim_;
};

inline SubVectorTable partition(const WeightMatrix& w, Index d) { return SubVectorTable(w, d); }

/// Shared k x d codeword table for one layer. k must be a power of two so
/// assignments pack at exactly log2(k) bits.
struct Codebook {
  MatF entries;  // k x d

  Index size() const { return entries.rows(); }
  Index dim() const { return entries.cols(); }
  auto codeword(Index idx) const { return entries.row(idx); }
};

inline void validate(const Codebook& cb) {
  if (cb.size() <= 0 || cb.dim() <= 0) throw ContractError("codebook has empty shape");
  if (!is_power_of_two(static_cast<std::uint64_t>(cb.size())))
    throw ContractError("codebook size " + std::to_string(cb.size()) + " is not a power of two");
  if (!cb.entries.allFinite()) throw DataError("codebook contains non-finite entries");
}

/// Hard codeword index per sub-vector, o rows by i/d slots.
struct Assignments {
  IndexMat indices;  // o x (i/d)

  Index rows() const { return indices.rows(); }
  Index slots() const { return indices.cols(); }
  Index count() const { return indices.size(); }
};

inline void validate(const Assignments& a, Index k) {
  for (Index r = 0; r < a.rows(); ++r)
    for (Index s = 0; s < a.slots(); ++s) {
      const auto idx = a.indices(r, s);
      if (idx < 0 || idx >= k)
        throw ContractError("assignment index " + std::to_string(idx) + " out of range [0, " +
                            std::to_string(k) + ")");
    }
}

}  // namespace vq

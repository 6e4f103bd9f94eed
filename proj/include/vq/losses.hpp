#pragma once

#include "vq/convex.hpp"
#include "vq/types.hpp"

#include <optional>
#include <vector>

namespace vq {

template <class Scalar>
struct ScalarGrad {
  Scalar value = 0;
  Mat<Scalar> grad;
};

/// Mean squared error over all elements plus its gradient 2*(out - tgt)/N.
template <class Scalar>
ScalarGrad<Scalar> loss_task(const Mat<Scalar>& outputs, const Mat<Scalar>& targets) {
  if (outputs.rows() != targets.rows() || outputs.cols() != targets.cols())
    throw ContractError("loss_task: output/target shape mismatch");
  const Scalar n = static_cast<Scalar>(outputs.size());
  ScalarGrad<Scalar> r;
  const Mat<Scalar> diff = outputs - targets;
  r.value = diff.squaredNorm() / n;
  r.grad = (Scalar(2) / n) * diff;
  return r;
}

template <class Scalar>
struct BlockGrad {
  Scalar value = 0;
  std::vector<Mat<Scalar>> grads;
};

/// Block-wise distillation penalty: per block, the squared feature gap
/// averaged over batch rows; blocks summed. Gradients are w.r.t. the
/// quantized-side features.
template <class Scalar>
BlockGrad<Scalar> loss_bkd(const std::vector<Mat<Scalar>>& fp_blocks,
                           const std::vector<Mat<Scalar>>& q_blocks) {
  if (fp_blocks.size() != q_blocks.size())
    throw ContractError("loss_bkd: block count mismatch");
  BlockGrad<Scalar> r;
  r.grads.reserve(q_blocks.size());
  for (std::size_t l = 0; l < q_blocks.size(); ++l) {
    const auto& fp = fp_blocks[l];
    const auto& q = q_blocks[l];
    if (fp.rows() != q.rows() || fp.cols() != q.cols())
      throw ContractError("loss_bkd: block " + std::to_string(l) + " shape mismatch");
    const Scalar batch = static_cast<Scalar>(q.rows());
    const Mat<Scalar> diff = q - fp;
    r.value += diff.squaredNorm() / batch;
    r.grads.push_back((Scalar(2) / batch) * diff);
  }
  return r;
}

/// Convergence regularizer for one layer: (d / (o*i)) * sum over unconfirmed
/// sub-vectors of sum_m r_m (1 - r_m), with gradients w.r.t. the scores.
/// Confirmed rows are one-hot by construction and contribute exactly zero.
template <class Scalar>
ScalarGrad<Scalar> reg_loss(const Mat<Scalar>& scores,
                            const std::vector<std::uint8_t>& confirmed, Index subdim,
                            Index weight_count) {
  const Scalar norm = static_cast<Scalar>(subdim) / static_cast<Scalar>(weight_count);
  ScalarGrad<Scalar> r;
  r.grad = Mat<Scalar>::Zero(scores.rows(), scores.cols());
  for (Index t = 0; t < scores.rows(); ++t) {
    if (confirmed[static_cast<std::size_t>(t)]) continue;
    const Vec<Scalar> ratios = softmax(scores.row(t));
    r.value += simplex_spread(ratios);
    r.grad.row(t) = spread_score_grad(ratios).transpose();
  }
  r.value *= norm;
  r.grad *= norm;
  return r;
}

struct Combined {
  double total = 0;
  bool include_reg = false;
};

/// Final objective composition: the regularizer joins the sum only when it
/// increased since the previous step (always on the first step).
inline Combined combine_losses(double task, double bkd, double reg,
                               std::optional<double> prev_reg) {
  Combined c;
  c.include_reg = !prev_reg.has_value() || reg > *prev_reg;
  c.total = task + bkd + (c.include_reg ? reg : 0.0);
  return c;
}

}  // namespace vq

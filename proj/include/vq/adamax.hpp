#pragma once

#include "vq/types.hpp"

#include <cmath>
#include <vector>

namespace vq {

/// Adamax state: first moment and infinity-norm accumulators, one slot per
/// parameter, plus the step counter used for first-moment bias correction.
template <class Scalar>
struct Adamax {
  Mat<Scalar> m;
  Mat<Scalar> u;
  long step_count = 0;
  Scalar beta1 = Scalar(0.9);
  Scalar beta2 = Scalar(0.999);
  Scalar eps = Scalar(1e-8);

  Adamax(Index rows, Index cols)
      : m(Mat<Scalar>::Zero(rows, cols)), u(Mat<Scalar>::Zero(rows, cols)) {}
};

/// One Adamax update:
///   m <- b1*m + (1-b1)*g,  u <- max(b2*u, |g|),
///   p <- p - lr * m / ((1 - b1^t) * (u + eps)).
/// Rows flagged in `frozen_rows` keep their parameters untouched.
template <class Scalar>
void adamax_step(Mat<Scalar>& params, const Mat<Scalar>& grads, Adamax<Scalar>& opt, Scalar lr,
                 const std::vector<std::uint8_t>* frozen_rows = nullptr) {
  if (params.rows() != grads.rows() || params.cols() != grads.cols() ||
      params.rows() != opt.m.rows() || params.cols() != opt.m.cols())
    throw ContractError("adamax_step: parameter/gradient/state shape mismatch");

  ++opt.step_count;
  opt.m = opt.beta1 * opt.m + (Scalar(1) - opt.beta1) * grads;
  opt.u = (opt.beta2 * opt.u.array()).max(grads.array().abs()).matrix();

  const Scalar bias = Scalar(1) - std::pow(opt.beta1, Scalar(opt.step_count));
  const Mat<Scalar> delta =
      (lr * opt.m.array() / (bias * (opt.u.array() + opt.eps))).matrix();

  if (frozen_rows == nullptr) {
    params -= delta;
    return;
  }
  for (Index r = 0; r < params.rows(); ++r)
    if (!(*frozen_rows)[static_cast<std::size_t>(r)]) params.row(r) -= delta.row(r);
}

}  // namespace vq

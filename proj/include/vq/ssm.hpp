#pragma once

#include "vq/types.hpp"

#include <unsupported/Eigen/MatrixFunctions>

namespace vq {

template <class Scalar>
struct Discretized {
  Mat<Scalar> state;  // exp(dt * E)
  Vec<Scalar> input;  // (dt*E)^{-1} (exp(dt*E) - I) dt*B
};

/// Zero-order-hold discretization via one augmented matrix exponential
///   exp([[dt*E, dt*B], [0, 0]]) = [[exp(dt*E), phi1(dt*E) dt*B], [0, I]],
/// which stays finite as dt*E -> 0 (no explicit inversion).
template <class Scalar>
Discretized<Scalar> ssm_discretize(const Mat<Scalar>& state, const Vec<Scalar>& input,
                                   Scalar dt) {
  if (!(dt > Scalar(0))) throw ContractError("ssm_discretize: timestep must be positive");
  if (state.rows() != state.cols())
    throw ContractError("ssm_discretize: state matrix must be square");
  if (input.size() != state.rows())
    throw ContractError("ssm_discretize: input vector length mismatch");
  const Index n = state.rows();
  Mat<Scalar> aug = Mat<Scalar>::Zero(n + 1, n + 1);
  aug.topLeftCorner(n, n) = dt * state;
  aug.topRightCorner(n, 1) = dt * input;
  const Mat<Scalar> e = aug.exp();
  return {e.topLeftCorner(n, n), e.topRightCorner(n, 1)};
}

/// Linear recurrence h_t = Ebar h_{t-1} + Bbar x_t, y_t = P h_t, h_0 = 0.
template <class Scalar>
Vec<Scalar> ssm_scan(const Mat<Scalar>& state_d, const Vec<Scalar>& input_d,
                     const Mat<Scalar>& out_proj, const Vec<Scalar>& x) {
  Vec<Scalar> h = Vec<Scalar>::Zero(state_d.rows());
  Vec<Scalar> y(x.size());
  for (Index t = 0; t < x.size(); ++t) {
    h = state_d * h + input_d * x[t];
    y[t] = (out_proj * h)(0, 0);
  }
  return y;
}

/// Structured convolution kernel (P Bbar, P Ebar Bbar, ..., P Ebar^{M-1} Bbar).
template <class Scalar>
Vec<Scalar> ssm_kernel(const Mat<Scalar>& state_d, const Vec<Scalar>& input_d,
                       const Mat<Scalar>& out_proj, Index len) {
  Vec<Scalar> taps(len);
  Vec<Scalar> v = input_d;
  for (Index j = 0; j < len; ++j) {
    taps[j] = (out_proj * v)(0, 0);
    v = state_d * v;
  }
  return taps;
}

/// Causal convolution y_t = sum_{j<=t} taps_j x_{t-j}, the dual form of the scan.
template <class Scalar>
Vec<Scalar> ssm_conv(const Vec<Scalar>& taps, const Vec<Scalar>& x) {
  Vec<Scalar> y = Vec<Scalar>::Zero(x.size());
  for (Index t = 0; t < x.size(); ++t)
    for (Index j = 0; j <= t && j < taps.size(); ++j) y[t] += taps[j] * x[t - j];
  return y;
}

/// A toy SSM-based block: a shared scalar state-space core applied per
/// channel, sandwiched between two linear projections which are the
/// quantization targets. The core stays full precision.
struct ToySSMBlock {
  MatD state_matrix;   // N x N
  VecD input_matrix;   // N
  MatD output_matrix;  // 1 x N
  double timestep = 0.1;
  WeightMatrix in_proj;   // channels x f_in
  WeightMatrix out_proj;  // f_out x channels
};

/// Recurrence-path forward of the scalar core for one sequence.
inline VecD ssm_forward(const ToySSMBlock& block, const VecD& x) {
  const auto d = ssm_discretize<double>(block.state_matrix, block.input_matrix,
                                        block.timestep);
  return ssm_scan<double>(d.state, d.input, block.output_matrix, x);
}

}  // namespace vq

#pragma once

#include "vq/calibrate.hpp"
#include "vq/losses.hpp"
#include "vq/ssm.hpp"
#include "vq/types.hpp"

namespace vq {

/// Two linear layers with bias and a rectifier in between; both weight
/// matrices are quantization targets, biases stay full precision.
template <class Scalar>
struct ToyMLP {
  Mat<Scalar> w1;  // hidden x in
  Mat<Scalar> w2;  // out x hidden
  Vec<Scalar> b1;
  Vec<Scalar> b2;
};

template <class Scalar>
struct MLPForward {
  Mat<Scalar> z1;  // batch x hidden, pre-activation
  Mat<Scalar> h;   // batch x hidden
  Mat<Scalar> z2;  // batch x out
};

template <class Scalar>
MLPForward<Scalar> mlp_forward(const ToyMLP<Scalar>& mlp, const Mat<Scalar>& x) {
  MLPForward<Scalar> f;
  f.z1 = (x * mlp.w1.transpose()).rowwise() + mlp.b1.transpose();
  f.h = f.z1.cwiseMax(Scalar(0));
  f.z2 = (f.h * mlp.w2.transpose()).rowwise() + mlp.b2.transpose();
  return f;
}

template <class Scalar>
struct MLPGrads {
  Scalar loss = 0;
  Mat<Scalar> gw1;
  Mat<Scalar> gw2;
};

/// Mean-squared-error loss against `targets` plus analytic gradients for
/// both weight matrices.
template <class Scalar>
MLPGrads<Scalar> toy_mlp_grads(const ToyMLP<Scalar>& mlp, const Mat<Scalar>& x,
                               const Mat<Scalar>& targets) {
  const auto f = mlp_forward(mlp, x);
  const auto task = loss_task<Scalar>(f.z2, targets);
  const Mat<Scalar>& dz2 = task.grad;
  const Mat<Scalar> dh = dz2 * mlp.w2;
  const Mat<Scalar> dz1 =
      (f.z1.array() > Scalar(0)).select(dh, Mat<Scalar>::Zero(dh.rows(), dh.cols()));
  MLPGrads<Scalar> g;
  g.loss = task.value;
  g.gw1 = dz1.transpose() * x;
  g.gw2 = dz2.transpose() * f.h;
  return g;
}

/// Calibration adapter for the toy MLP. Layer order: {w1, w2}; block
/// features are the two linear-layer outputs (pre-activation).
class MLPAdapter : public ModelAdapter {
 public:
  MLPAdapter(VecF bias1, VecF bias2) : b1_(std::move(bias1)), b2_(std::move(bias2)) {}

  Index layer_count() const override { return 2; }

  Forward forward(const MatF& inputs, const std::vector<MatF>& weights) override {
    if (weights.size() != 2) throw ContractError("MLPAdapter: expected two weight matrices");
    x_ = inputs;
    w2_ = weights[1];
    z1_ = (inputs * weights[0].transpose()).rowwise() + b1_.transpose();
    h_ = z1_.cwiseMax(0.0f);
    MatF z2 = (h_ * w2_.transpose()).rowwise() + b2_.transpose();
    Forward out;
    out.blocks = {z1_, z2};
    out.outputs = std::move(z2);
    return out;
  }

  std::vector<MatF> backward(const MatF& grad_outputs,
                             const std::vector<MatF>& grad_blocks) override {
    if (grad_blocks.size() != 2) throw ContractError("MLPAdapter: expected two block grads");
    const MatF dz2 = grad_outputs + grad_blocks[1];
    const MatF dh = dz2 * w2_;
    const MatF dz1 =
        (z1_.array() > 0.0f).select(dh, MatF::Zero(dh.rows(), dh.cols())) + grad_blocks[0];
    return {dz1.transpose() * x_, dz2.transpose() * h_};
  }

 private:
  VecF b1_, b2_;
  MatF x_, z1_, h_, w2_;
};

/// Calibration adapter for the toy SSM block. Inputs are flattened
/// sequences (one row per sample, laid out time-major: t * f_in + f).
/// Block features are the in-projection and out-projection outputs; the
/// scan itself carries no gradient, so the in-projection learns from its
/// feature-matching term only.
class SSMAdapter : public ModelAdapter {
 public:
  SSMAdapter(const ToySSMBlock& block, Index seq_len)
      : seq_len_(seq_len),
        f_in_(block.in_proj.cols()),
        channels_(block.in_proj.rows()),
        f_out_(block.out_proj.rows()),
        out_proj_rowsum_(block.output_matrix) {
    const auto d =
        ssm_discretize<double>(block.state_matrix, block.input_matrix, block.timestep);
    state_d_ = d.state;
    input_d_ = d.input;
  }

  Index layer_count() const override { return 2; }
  Index input_width() const { return seq_len_ * f_in_; }
  Index output_width() const { return seq_len_ * f_out_; }

  Forward forward(const MatF& inputs, const std::vector<MatF>& weights) override;
  std::vector<MatF> backward(const MatF& grad_outputs,
                             const std::vector<MatF>& grad_blocks) override;

 private:
  Index seq_len_, f_in_, channels_, f_out_;
  MatD state_d_;
  VecD input_d_;
  MatD out_proj_rowsum_;  // 1 x N readout of the core
  MatF inputs_;           // cached for backward
  MatF scanned_;          // samples x (seq_len * channels)
};

/// Independent per-layer linear probes: layer l maps its own slice of the
/// input (width i_l) to its own slice of the output (width o_l). Works for
/// any bundle, which is what the CLI calibration path uses.
class LinearProbeAdapter : public ModelAdapter {
 public:
  explicit LinearProbeAdapter(const ModelBundle& bundle);

  Index layer_count() const override { return static_cast<Index>(in_widths_.size()); }
  Index input_width() const { return total_in_; }
  Index output_width() const { return total_out_; }

  Forward forward(const MatF& inputs, const std::vector<MatF>& weights) override;
  std::vector<MatF> backward(const MatF& grad_outputs,
                             const std::vector<MatF>& grad_blocks) override;

 private:
  std::vector<Index> in_widths_, out_widths_, in_offsets_, out_offsets_;
  Index total_in_ = 0, total_out_ = 0;
  MatF inputs_;
};

}  // namespace vq

#include "vq/toys.hpp"

namespace vq {

ModelAdapter::Forward SSMAdapter::forward(const MatF& inputs, const std::vector<MatF>& weights) {
  if (weights.size() != 2) throw ContractError("SSMAdapter: expected two weight matrices");
  const MatF& w_in = weights[0];   // channels x f_in
  const MatF& w_out = weights[1];  // f_out x channels
  if (w_in.rows() != channels_ || w_in.cols() != f_in_ || w_out.rows() != f_out_ ||
      w_out.cols() != channels_)
    throw ContractError("SSMAdapter: weight shapes do not match block");
  if (inputs.cols() != input_width())
    throw ContractError("SSMAdapter: input width does not match seq_len * f_in");

  inputs_ = inputs;
  const Index samples = inputs.rows();
  MatF projected(samples, seq_len_ * channels_);
  scanned_.resize(samples, seq_len_ * channels_);
  MatF outputs(samples, seq_len_ * f_out_);

  VecD h(state_d_.rows());
  for (Index smp = 0; smp < samples; ++smp) {
    Eigen::Map<const MatF> u(inputs.row(smp).data(), seq_len_, f_in_);
    Eigen::Map<MatF> x(projected.row(smp).data(), seq_len_, channels_);
    x = u * w_in.transpose();

    Eigen::Map<MatF> y(scanned_.row(smp).data(), seq_len_, channels_);
    for (Index c = 0; c < channels_; ++c) {
      h.setZero();
      for (Index t = 0; t < seq_len_; ++t) {
        h = state_d_ * h + input_d_ * static_cast<double>(x(t, c));
        y(t, c) = static_cast<float>((out_proj_rowsum_ * h)(0, 0));
      }
    }

    Eigen::Map<MatF> o(outputs.row(smp).data(), seq_len_, f_out_);
    o = y * w_out.transpose();
  }

  Forward out;
  out.blocks.reserve(2);
  out.blocks.push_back(std::move(projected));
  out.blocks.push_back(outputs);
  out.outputs = std::move(outputs);
  return out;
}

std::vector<MatF> SSMAdapter::backward(const MatF& grad_outputs,
                                       const std::vector<MatF>& grad_blocks) {
  if (grad_blocks.size() != 2) throw ContractError("SSMAdapter: expected two block grads");
  MatF gw_in = MatF::Zero(channels_, f_in_);
  MatF gw_out = MatF::Zero(f_out_, channels_);
  for (Index smp = 0; smp < inputs_.rows(); ++smp) {
    Eigen::Map<const MatF> u(inputs_.row(smp).data(), seq_len_, f_in_);
    Eigen::Map<const MatF> y(scanned_.row(smp).data(), seq_len_, channels_);
    // The out-projection sees the task gradient plus its feature term; the
    // in-projection sees only its feature term (no gradient through the scan).
    MatF d_o = Eigen::Map<const MatF>(grad_outputs.row(smp).data(), seq_len_, f_out_);
    d_o += Eigen::Map<const MatF>(grad_blocks[1].row(smp).data(), seq_len_, f_out_);
    Eigen::Map<const MatF> d_x(grad_blocks[0].row(smp).data(), seq_len_, channels_);
    gw_out += d_o.transpose() * y;
    gw_in += d_x.transpose() * u;
  }
  return {std::move(gw_in), std::move(gw_out)};
}

LinearProbeAdapter::LinearProbeAdapter(const ModelBundle& bundle) {
  for (const auto& layer : bundle.layers) {
    in_offsets_.push_back(total_in_);
    out_offsets_.push_back(total_out_);
    in_widths_.push_back(layer.cols());
    out_widths_.push_back(layer.rows());
    total_in_ += layer.cols();
    total_out_ += layer.rows();
  }
}

ModelAdapter::Forward LinearProbeAdapter::forward(const MatF& inputs,
                                                  const std::vector<MatF>& weights) {
  if (static_cast<Index>(weights.size()) != layer_count())
    throw ContractError("LinearProbeAdapter: weight count mismatch");
  if (inputs.cols() != total_in_)
    throw ContractError("LinearProbeAdapter: input width mismatch");
  inputs_ = inputs;
  Forward out;
  out.outputs.resize(inputs.rows(), total_out_);
  out.blocks.reserve(weights.size());
  for (std::size_t l = 0; l < weights.size(); ++l) {
    MatF block = inputs.middleCols(in_offsets_[l], in_widths_[l]) * weights[l].transpose();
    out.outputs.middleCols(out_offsets_[l], out_widths_[l]) = block;
    out.blocks.push_back(std::move(block));
  }
  return out;
}

std::vector<MatF> LinearProbeAdapter::backward(const MatF& grad_outputs,
                                               const std::vector<MatF>& grad_blocks) {
  if (static_cast<Index>(grad_blocks.size()) != layer_count())
    throw ContractError("LinearProbeAdapter: block grad count mismatch");
  std::vector<MatF> grads;
  grads.reserve(grad_blocks.size());
  for (std::size_t l = 0; l < grad_blocks.size(); ++l) {
    const MatF d_out =
        grad_outputs.middleCols(out_offsets_[l], out_widths_[l]) + grad_blocks[l];
    grads.push_back(d_out.transpose() * inputs_.middleCols(in_offsets_[l], in_widths_[l]));
  }
  return grads;
}

}  // namespace vq

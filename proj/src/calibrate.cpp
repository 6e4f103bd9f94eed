#include "vq/calibrate.hpp"

#include "vq/adamax.hpp"
#include "vq/kmeans.hpp"
#include "vq/losses.hpp"
#include "vq/packfmt.hpp"
#include "vq/qinfer.hpp"
#include "vq/rng.hpp"

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <optional>
#include <sstream>

namespace vq {

std::array<std::uint64_t, kHistogramBins> max_ratio_histogram(const SoftState& st) {
  std::array<std::uint64_t, kHistogramBins> bins{};
  max_ratio_histogram(st, bins);
  return bins;
}

void max_ratio_histogram(const SoftState& st, std::array<std::uint64_t, kHistogramBins>& bins) {
  for (Index t = 0; t < st.count(); ++t) {
    float top = 1.0f;
    if (!st.confirmed[static_cast<std::size_t>(t)])
      top = softmax(st.scores.row(t)).maxCoeff();
    Index bin = static_cast<Index>(top / 0.05f);
    if (bin >= kHistogramBins) bin = kHistogramBins - 1;
    if (bin < 0) bin = 0;
    ++bins[static_cast<std::size_t>(bin)];
  }
}

ConfirmStats confirm_step(SoftState& st, const Codebook& cb, double tau, InvariantStats* inv) {
  ConfirmStats stats;
  const Index n = st.fanout();
  for (Index t = 0; t < st.count(); ++t) {
    if (st.confirmed[static_cast<std::size_t>(t)]) continue;
    const VecF ratios = softmax(st.scores.row(t));
    Index best = 0;
    for (Index m = 1; m < n; ++m)
      if (ratios[m] > ratios[best]) best = m;
    if (!(static_cast<double>(ratios[best]) > tau)) continue;

    Eigen::RowVectorXf soft = Eigen::RowVectorXf::Zero(cb.dim());
    for (Index m = 0; m < n; ++m) soft += ratios[m] * cb.entries.row(st.candidates(t, m));
    const Index winner = st.candidates(t, best);
    const double err = (cb.entries.row(winner) - soft).squaredNorm();
    stats.truncation += err;
    ++stats.confirmed;

    if (inv != nullptr) {
      double max_gap = 0;
      for (Index m = 0; m < n; ++m)
        max_gap = std::max(
            max_gap,
            static_cast<double>(
                (cb.entries.row(winner) - cb.entries.row(st.candidates(t, m))).norm()));
      const double bound = (1.0 - ratios[best]) * (1.0 - ratios[best]) * max_gap * max_gap;
      ++inv->truncation_checks;
      if (err > bound * (1.0 + 1e-4) + 1e-12) ++inv->truncation_violations;
    }

    st.confirmed[static_cast<std::size_t>(t)] = 1;
    st.confirmed_index[static_cast<std::size_t>(t)] = static_cast<std::int32_t>(winner);
  }
  return stats;
}

ForceStats finalize_force_confirm(SoftState& st, const Codebook& cb) {
  ForceStats stats;
  const Index n = st.fanout();
  for (Index t = 0; t < st.count(); ++t) {
    if (st.confirmed[static_cast<std::size_t>(t)]) continue;
    const VecF ratios = softmax(st.scores.row(t));
    Index best = 0;
    for (Index m = 1; m < n; ++m)
      if (ratios[m] > ratios[best]) best = m;

    Eigen::RowVectorXf soft = Eigen::RowVectorXf::Zero(cb.dim());
    for (Index m = 0; m < n; ++m) soft += ratios[m] * cb.entries.row(st.candidates(t, m));
    const Index winner = st.candidates(t, best);
    stats.residual += (cb.entries.row(winner) - soft).squaredNorm();
    ++stats.forced;
    st.confirmed[static_cast<std::size_t>(t)] = 1;
    st.confirmed_index[static_cast<std::size_t>(t)] = static_cast<std::int32_t>(winner);
  }
  return stats;
}

Assignments to_assignments(const SoftState& st, Index rows, Index slots) {
  if (rows * slots != st.count())
    throw ContractError("to_assignments: shape does not match sub-vector count");
  Assignments a;
  a.indices.resize(rows, slots);
  for (Index t = 0; t < st.count(); ++t) {
    if (!st.confirmed[static_cast<std::size_t>(t)])
      throw ContractError("to_assignments: sub-vector " + std::to_string(t) +
                          " is not confirmed");
    a.indices(t / slots, t % slots) = st.confirmed_index[static_cast<std::size_t>(t)];
  }
  return a;
}

namespace {

struct LayerWork {
  std::string name;
  Index rows = 0, cols = 0, subdim = 0;
  Codebook codebook;
  SoftState state;
  Adamax<float> opt_scores{1, 1};
  Adamax<float> opt_codebook{1, 1};
  MatF ratios;  // refreshed each step alongside the reconstruction
};

void check_step_invariants(const LayerWork& layer, const MatF& recon_rows,
                           InvariantStats& inv) {
  const auto& st = layer.state;
  const Index n = st.fanout();
  for (Index t = 0; t < st.count(); ++t) {
    if (st.confirmed[static_cast<std::size_t>(t)]) continue;
    ++inv.simplex_checks;
    float sum = 0, lo = 1;
    for (Index m = 0; m < n; ++m) {
      sum += layer.ratios(t, m);
      lo = std::min(lo, layer.ratios(t, m));
    }
    if (std::abs(sum - 1.0f) > 1e-6f || lo < 0.0f) ++inv.simplex_violations;

    ++inv.hull_checks;
    for (Index c = 0; c < layer.subdim; ++c) {
      float cmin = std::numeric_limits<float>::infinity();
      float cmax = -std::numeric_limits<float>::infinity();
      for (Index m = 0; m < n; ++m) {
        const float v = layer.codebook.entries(st.candidates(t, m), c);
        cmin = std::min(cmin, v);
        cmax = std::max(cmax, v);
      }
      const float pad = 1e-5f * std::max(1.0f, std::max(std::abs(cmin), std::abs(cmax)));
      if (recon_rows(t, c) < cmin - pad || recon_rows(t, c) > cmax + pad) {
        ++inv.hull_violations;
        break;
      }
    }
  }
}

}  // namespace

CalibResult calibrate(const ModelBundle& bundle, ModelAdapter& adapter, const MatF& inputs,
                      const MatF& targets, Index subdim, Index k, const ConvexConfig& ccfg,
                      const CalibConfig& cfg) {
  validate(bundle);
  validate(cfg);
  validate(ccfg, k);
  const Index layer_count = static_cast<Index>(bundle.layers.size());
  if (adapter.layer_count() != layer_count)
    throw ContractError("calibrate: adapter layer count does not match bundle");
  if (inputs.rows() != targets.rows())
    throw ContractError("calibrate: input/target sample counts differ");

  CalibResult result;
  CalibReport& report = result.report;

  // Stage 1: per-layer codebook seeding, Lloyd refinement, candidate
  // selection, and the reconstruction-error warmup.
  std::vector<LayerWork> layers(static_cast<std::size_t>(layer_count));
  std::vector<MatF> fp_weights;
  fp_weights.reserve(static_cast<std::size_t>(layer_count));
  for (Index l = 0; l < layer_count; ++l) {
    auto& work = layers[static_cast<std::size_t>(l)];
    const WeightMatrix& wm = bundle.layers[static_cast<std::size_t>(l)];
    fp_weights.push_back(wm.values);
    work.name = wm.name;
    work.rows = wm.rows();
    work.cols = wm.cols();
    work.subdim = subdim;

    const SubVectorTable table = partition(wm, subdim);
    Codebook seeded = kmeanspp_seed(table, k, layer_seed(cfg.seed, l));
    LloydResult km = lloyd(table, std::move(seeded), cfg.kmeans_iters, cfg.kmeans_tol);
    report.kmeans_distortion.push_back(km.distortion);
    work.codebook = std::move(km.codebook);
    work.state = init_soft_state(table, work.codebook, ccfg.candidates);
    report.init_reports.push_back(init_phase(table, work.state, work.codebook, ccfg));

    work.opt_scores = Adamax<float>(work.state.count(), work.state.fanout());
    work.opt_codebook = Adamax<float>(k, subdim);
  }

  // Full-precision per-batch features for the distillation term.
  const Index samples = inputs.rows();
  const Index batches = (samples + cfg.batch - 1) / cfg.batch;
  std::vector<std::vector<MatF>> fp_blocks(static_cast<std::size_t>(batches));
  for (Index b = 0; b < batches; ++b) {
    const Index lo = b * cfg.batch;
    const Index len = std::min(cfg.batch, samples - lo);
    fp_blocks[static_cast<std::size_t>(b)] =
        adapter.forward(inputs.middleRows(lo, len), fp_weights).blocks;
  }

  const auto weight_count = [](const LayerWork& w) { return w.rows * w.cols; };
  const auto total_subvectors = [&]() {
    Index n = 0;
    for (const auto& w : layers) n += w.state.count();
    return n;
  }();

  const auto reconstruct_all = [&](std::vector<MatF>& out) {
    out.clear();
    out.reserve(layers.size());
    for (auto& work : layers) {
      work.ratios = all_ratios(work.state);
      MatF w(work.rows, work.cols);
      Eigen::Map<MatF> view(w.data(), work.state.count(), work.subdim);
      reconstruct_rows(work.state, work.codebook, work.ratios, view);
      out.push_back(std::move(w));
    }
  };

  std::optional<double> prev_reg;
  std::vector<MatF> qweights;
  std::uint64_t global_step = 0;
  bool all_confirmed = false;

  for (Index epoch = 0; epoch < cfg.max_epochs && !all_confirmed; ++epoch) {
    EpochStats stats;
    for (Index b = 0; b < batches && !all_confirmed; ++b) {
      const Index lo = b * cfg.batch;
      const Index len = std::min(cfg.batch, samples - lo);
      ++global_step;

      reconstruct_all(qweights);
      const auto q = adapter.forward(inputs.middleRows(lo, len), qweights);

      const auto task = loss_task<float>(q.outputs, targets.middleRows(lo, len));
      const auto bkd = loss_bkd<float>(fp_blocks[static_cast<std::size_t>(b)], q.blocks);

      double reg_value = 0;
      std::vector<ScalarGrad<float>> reg_grads;
      reg_grads.reserve(layers.size());
      for (auto& work : layers) {
        reg_grads.push_back(reg_loss<float>(work.state.scores, work.state.confirmed,
                                            work.subdim, weight_count(work)));
        reg_value += reg_grads.back().value;
      }

      Combined total = combine_losses(cfg.w_task * task.value, cfg.w_bkd * bkd.value,
                                      cfg.w_reg * reg_value, prev_reg);
      if (std::getenv("VQ_ALWAYS_REG") != nullptr) {  // TEMP experiment
        total.include_reg = true;
        total.total = cfg.w_task * task.value + cfg.w_bkd * bkd.value + cfg.w_reg * reg_value;
      }
      prev_reg = cfg.w_reg * reg_value;

      if (!std::isfinite(total.total)) {
        std::ostringstream diag;
        diag << "calibration diverged at epoch " << epoch << " step " << global_step
             << ": task=" << task.value << " bkd=" << bkd.value << " reg=" << reg_value
             << " confirmed=";
        for (const auto& work : layers)
          diag << " " << work.name << ":" << work.state.confirmed_count() << "/"
               << work.state.count();
        throw DataError(diag.str());
      }

      stats.task += task.value;
      stats.bkd += bkd.value;
      stats.reg += reg_value;
      ++stats.steps;
      if (total.include_reg) ++stats.reg_included_steps;

      // Backpropagate the task + distillation terms through the adapter.
      MatF grad_out = cfg.w_task * task.grad;
      std::vector<MatF> grad_blocks;
      grad_blocks.reserve(bkd.grads.size());
      for (const auto& g : bkd.grads) grad_blocks.push_back(cfg.w_bkd * g);
      const std::vector<MatF> weight_grads = adapter.backward(grad_out, grad_blocks);
      if (static_cast<Index>(weight_grads.size()) != layer_count)
        throw ContractError("calibrate: adapter returned wrong gradient count");

      for (Index l = 0; l < layer_count; ++l) {
        auto& work = layers[static_cast<std::size_t>(l)];
        const MatF& gw = weight_grads[static_cast<std::size_t>(l)];
        if (gw.rows() != work.rows || gw.cols() != work.cols)
          throw ContractError("calibrate: gradient shape mismatch for layer '" + work.name +
                              "'");
        Eigen::Map<const MatF> upstream(gw.data(), work.state.count(), work.subdim);

        MatF gscores = MatF::Zero(work.state.count(), work.state.fanout());
        Mat<float> gathered(work.state.fanout(), work.subdim);
        for (Index t = 0; t < work.state.count(); ++t) {
          if (work.state.confirmed[static_cast<std::size_t>(t)]) continue;
          for (Index m = 0; m < work.state.fanout(); ++m)
            gathered.row(m) = work.codebook.entries.row(work.state.candidates(t, m));
          gscores.row(t) = score_grad<float>(upstream.row(t).transpose(), gathered,
                                             work.ratios.row(t).transpose())
                               .transpose();
        }
        if (total.include_reg)
          gscores += static_cast<float>(cfg.w_reg) * reg_grads[static_cast<std::size_t>(l)].grad;

        const MatF gcb = codebook_grad<float>(
            MatF(upstream), work.state.candidates, work.ratios, work.state.confirmed,
            work.state.confirmed_index, k);

        adamax_step(work.state.scores, gscores, work.opt_scores, ccfg.lr_scores,
                    &work.state.confirmed);
        adamax_step(work.codebook.entries, gcb, work.opt_codebook, ccfg.lr_codebook);

        if (cfg.check_invariants) {
          MatF recon(work.state.count(), work.subdim);
          reconstruct_rows(work.state, work.codebook, work.ratios, recon);
          check_step_invariants(work, recon, report.invariants);
        }
      }

      if (cfg.enable_replacement && (global_step % static_cast<std::uint64_t>(
                                                       ccfg.replace_every)) == 0) {
        for (auto& work : layers) {
          ReplaceCheck check;
          ReplaceCheck* check_ptr = cfg.check_invariants ? &check : nullptr;
          replace_sweep(work.state, work.codebook, ccfg.replace_threshold, check_ptr);
          if (cfg.check_invariants) {
            report.invariants.replace_checks += check.checks;
            report.invariants.replace_violations += check.violations;
            report.invariants.max_replace_perturbation =
                std::max(report.invariants.max_replace_perturbation, check.max_perturbation);
          }
        }
      }

      if (cfg.enable_incremental) {
        for (auto& work : layers) {
          const ConfirmStats cs =
              confirm_step(work.state, work.codebook, cfg.tau,
                           cfg.check_invariants ? &report.invariants : nullptr);
          stats.truncation_error += cs.truncation;
          report.total_truncation += cs.truncation;
        }
        Index confirmed = 0;
        for (const auto& work : layers) confirmed += work.state.confirmed_count();
        all_confirmed = confirmed == total_subvectors;
      }
    }

    Index confirmed = 0;
    for (const auto& work : layers) {
      confirmed += work.state.confirmed_count();
      max_ratio_histogram(work.state, stats.histogram);
    }
    stats.confirmed_fraction =
        static_cast<double>(confirmed) / static_cast<double>(total_subvectors);
    if (stats.steps > 0) {
      stats.task /= stats.steps;
      stats.bkd /= stats.steps;
      stats.reg /= stats.steps;
    }
    report.epochs.push_back(stats);
  }

  report.fully_confirmed_by_threshold = all_confirmed;

  // Final calibration-side loss, measured before any force confirmation.
  reconstruct_all(qweights);
  report.final_calib_loss =
      loss_task<float>(adapter.forward(inputs, qweights).outputs, targets).value;

  for (auto& work : layers) {
    const ForceStats fs = finalize_force_confirm(work.state, work.codebook);
    report.force_confirmed += fs.forced;
    report.force_residual += fs.residual;
  }

  // Inference-side loss from the bit-packed representation.
  std::vector<MatF> decoded;
  decoded.reserve(layers.size());
  for (auto& work : layers) {
    Assignments a = to_assignments(work.state, work.rows, work.cols / work.subdim);
    const PackedLayer packed = pack_layer(work.name, work.codebook, a);
    decoded.push_back(decode(packed));
    result.codebooks.push_back(work.codebook);
    result.assignments.push_back(std::move(a));
  }
  report.final_infer_loss =
      loss_task<float>(adapter.forward(inputs, decoded).outputs, targets).value;

  report.representation_bit_equal = true;
  for (std::size_t l = 0; l < decoded.size(); ++l)
    if (std::memcmp(decoded[l].data(), qweights[l].data(),
                    static_cast<std::size_t>(decoded[l].size()) * sizeof(float)) != 0)
      report.representation_bit_equal = false;

  return result;
}

}  // namespace vq

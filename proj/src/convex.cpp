#include "vq/convex.hpp"

#include "vq/adamax.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace vq {

IndexVec select_candidates(const Eigen::Ref<const Eigen::RowVectorXf>& w, const Codebook& cb,
                           Index n) {
  const Index k = cb.size();
  if (n > k) throw ContractError("select_candidates: n exceeds codebook size");
  std::vector<std::pair<float, Index>> order(static_cast<std::size_t>(k));
  for (Index c = 0; c < k; ++c)
    order[static_cast<std::size_t>(c)] = {(w - cb.entries.row(c)).squaredNorm(), c};
  std::partial_sort(order.begin(), order.begin() + n, order.end());
  IndexVec out(n);
  for (Index m = 0; m < n; ++m) out[m] = static_cast<std::int32_t>(order[static_cast<std::size_t>(m)].second);
  return out;
}

SoftState init_soft_state(const SubVectorTable& table, const Codebook& cb, Index n) {
  if (cb.dim() != table.dim())
    throw ContractError("init_soft_state: codebook dim does not match table");
  const Index count = table.count();
  SoftState st;
  st.candidates.resize(count, n);
  st.scores.resize(count, n);
  st.confirmed.assign(static_cast<std::size_t>(count), 0);
  st.confirmed_index.assign(static_cast<std::size_t>(count), -1);

  MatF sq(count, n);
  double nearest_sum = 0;
  for (Index t = 0; t < count; ++t) {
    const IndexVec cand = select_candidates(table.subvec(t), cb, n);
    st.candidates.row(t) = cand.transpose();
    for (Index m = 0; m < n; ++m)
      sq(t, m) = (table.subvec(t) - cb.entries.row(cand[m])).squaredNorm();
    nearest_sum += sq(t, 0);  // candidates sorted, slot 0 is the nearest
  }

  // Scores proportional to negative squared distance, scaled by the layer
  // mean nearest distance so ratios start proximity-weighted rather than
  // uniform.
  const float temp =
      std::max(static_cast<float>(nearest_sum / static_cast<double>(count)), 1e-12f);
  st.scores = (-sq.array() / temp).matrix();
  return st;
}

MatF all_ratios(const SoftState& st) {
  MatF r(st.count(), st.fanout());
  for (Index t = 0; t < st.count(); ++t) r.row(t) = softmax(st.scores.row(t)).transpose();
  return r;
}

void reconstruct_rows(const SoftState& st, const Codebook& cb, const MatF& ratios,
                      Eigen::Ref<MatF> out) {
  const Index n = st.fanout();
  for (Index t = 0; t < st.count(); ++t) {
    if (st.confirmed[static_cast<std::size_t>(t)]) {
      out.row(t) = cb.entries.row(st.confirmed_index[static_cast<std::size_t>(t)]);
      continue;
    }
    out.row(t).setZero();
    for (Index m = 0; m < n; ++m)
      out.row(t) += ratios(t, m) * cb.entries.row(st.candidates(t, m));
  }
}

MatF reconstruct_weights(const SoftState& st, const Codebook& cb, Index rows, Index cols) {
  MatF w(rows, cols);
  Eigen::Map<MatF> view(w.data(), st.count(), cb.dim());
  const MatF ratios = all_ratios(st);
  reconstruct_rows(st, cb, ratios, view);
  return w;
}

InitPhaseReport init_phase(const SubVectorTable& table, SoftState& st, Codebook& cb,
                           const ConvexConfig& cfg) {
  const Index count = table.count();
  const Index d = table.dim();
  const auto points = table.as_matrix();

  MatF recon(count, d);
  const auto loss_of = [&](const MatF& ratios) {
    reconstruct_rows(st, cb, ratios, recon);
    double loss = 0;
    for (Index t = 0; t < count; ++t) loss += (points.row(t) - recon.row(t)).squaredNorm();
    return loss;
  };

  InitPhaseReport report;
  report.initial_loss = loss_of(all_ratios(st));
  report.steps = cfg.init_steps;

  Adamax<float> opt_scores(count, st.fanout());
  Adamax<float> opt_codebook(cb.size(), d);
  MatF grad_scores(count, st.fanout());
  MatF upstream(count, d);
  Mat<float> gathered(st.fanout(), d);

  for (Index step = 0; step < cfg.init_steps; ++step) {
    const MatF ratios = all_ratios(st);
    reconstruct_rows(st, cb, ratios, recon);
    upstream = 2.0f * (recon - points.eval());

    for (Index t = 0; t < count; ++t) {
      for (Index m = 0; m < st.fanout(); ++m)
        gathered.row(m) = cb.entries.row(st.candidates(t, m));
      grad_scores.row(t) =
          score_grad<float>(upstream.row(t).transpose(), gathered, ratios.row(t).transpose())
              .transpose();
    }
    const MatF grad_cb =
        codebook_grad<float>(upstream, st.candidates, ratios, st.confirmed, st.confirmed_index,
                             cb.size());

    adamax_step(st.scores, grad_scores, opt_scores, cfg.lr_scores);
    adamax_step(cb.entries, grad_cb, opt_codebook, cfg.lr_codebook);
  }

  report.final_loss = loss_of(all_ratios(st));
  return report;
}

double max_pairwise_distance(const Codebook& cb) {
  double best = 0;
  for (Index a = 0; a < cb.size(); ++a)
    for (Index b = a + 1; b < cb.size(); ++b) {
      const double d = (cb.entries.row(a) - cb.entries.row(b)).norm();
      if (d > best) best = d;
    }
  return best;
}

ReplaceStats replace_sweep(SoftState& st, const Codebook& cb, float lambda,
                           ReplaceCheck* check) {
  ReplaceStats stats;
  const Index n = st.fanout();
  const Index k = cb.size();
  if (n >= k) return stats;  // no codewords outside the candidate set

  if (check != nullptr) check->bound = static_cast<double>(lambda) * max_pairwise_distance(cb);

  VecF dist(k);
  for (Index t = 0; t < st.count(); ++t) {
    if (st.confirmed[static_cast<std::size_t>(t)]) continue;
    const VecF ratios = softmax(st.scores.row(t));
    bool any_low = false;
    for (Index m = 0; m < n; ++m) any_low |= ratios[m] < lambda;
    if (!any_low) continue;

    // Current reconstruction, fixed for the whole sweep over this sub-vector.
    Eigen::RowVectorXf recon = Eigen::RowVectorXf::Zero(cb.dim());
    for (Index m = 0; m < n; ++m)
      recon += ratios[m] * cb.entries.row(st.candidates(t, m));

    for (Index c = 0; c < k; ++c) dist[c] = (recon - cb.entries.row(c)).squaredNorm();

    bool replaced_any = false;
    for (Index m = 0; m < n; ++m) {
      if (!(ratios[m] < lambda)) continue;
      // Closest codeword not already in the (possibly updated) candidate set.
      Index best = -1;
      float best_d = std::numeric_limits<float>::infinity();
      for (Index c = 0; c < k; ++c) {
        bool in_set = false;
        for (Index j = 0; j < n; ++j) in_set |= st.candidates(t, j) == c;
        if (in_set) continue;
        if (dist[c] < best_d) {
          best_d = dist[c];
          best = c;
        }
      }
      if (best < 0) break;  // candidate set exhausted the codebook
      st.candidates(t, m) = static_cast<std::int32_t>(best);
      ++stats.replaced;
      replaced_any = true;
    }
    if (replaced_any) {
      ++stats.affected_subvectors;
      if (check != nullptr) {
        Eigen::RowVectorXf after = Eigen::RowVectorXf::Zero(cb.dim());
        for (Index m = 0; m < n; ++m)
          after += ratios[m] * cb.entries.row(st.candidates(t, m));
        const double moved = (after - recon).norm();
        ++check->checks;
        check->max_perturbation = std::max(check->max_perturbation, moved);
        if (moved > check->bound * (1.0 + 1e-6) + 1e-12) ++check->violations;
      }
    }
  }
  return stats;
}

}  // namespace vq

#include "vq/kmeans.hpp"

#include "vq/rng.hpp"

#include <limits>

namespace vq {

namespace {

// Nearest codeword for one sub-vector: scan all k, keep (distance, lowest index).
std::pair<Index, float> nearest_codeword(const SubVectorTable& table, Index t,
                                         const MatF& centers) {
  const auto sv = table.subvec(t);
  Index best = 0;
  float best_d = std::numeric_limits<float>::infinity();
  for (Index c = 0; c < centers.rows(); ++c) {
    const float d = (sv - centers.row(c)).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return {best, best_d};
}

}  // namespace

Codebook kmeanspp_seed(const SubVectorTable& table, Index k, std::uint64_t seed) {
  if (!is_power_of_two(static_cast<std::uint64_t>(k)))
    throw ContractError("kmeanspp_seed: k must be a power of two");
  const Index count = table.count();
  if (count < k)
    throw ContractError("kmeanspp_seed: fewer sub-vectors (" + std::to_string(count) +
                        ") than requested centers (" + std::to_string(k) + ")");

  SplitMix64 rng(seed);
  const auto points = table.as_matrix();
  MatF centers(k, table.dim());
  std::vector<double> min_d(static_cast<std::size_t>(count),
                            std::numeric_limits<double>::infinity());

  Index first = static_cast<Index>(rng.next_below(static_cast<std::uint64_t>(count)));
  centers.row(0) = points.row(first);
  for (Index t = 0; t < count; ++t)
    min_d[static_cast<std::size_t>(t)] = (points.row(t) - centers.row(0)).squaredNorm();

  for (Index c = 1; c < k; ++c) {
    double total = 0;
    for (Index t = 0; t < count; ++t) total += min_d[static_cast<std::size_t>(t)];

    Index chosen;
    if (total > 0) {
      const double threshold = rng.next_double() * total;
      double cum = 0;
      chosen = count - 1;
      for (Index t = 0; t < count; ++t) {
        cum += min_d[static_cast<std::size_t>(t)];
        if (cum > threshold) {
          chosen = t;
          break;
        }
      }
    } else {
      // All remaining points coincide with existing centers (duplicates).
      chosen = static_cast<Index>(rng.next_below(static_cast<std::uint64_t>(count)));
    }

    centers.row(c) = points.row(chosen);
    for (Index t = 0; t < count; ++t) {
      const double d = (points.row(t) - centers.row(c)).squaredNorm();
      auto& m = min_d[static_cast<std::size_t>(t)];
      if (d < m) m = d;
    }
  }
  return Codebook{std::move(centers)};
}

LloydResult lloyd(const SubVectorTable& table, Codebook cb, Index max_iters, double tol) {
  if (cb.dim() != table.dim()) throw ContractError("lloyd: codebook dim does not match table");
  const Index count = table.count();
  const Index k = cb.size();
  const Index d = table.dim();

  LloydResult res;
  std::vector<Index> assign(static_cast<std::size_t>(count), 0);
  std::vector<float> dist(static_cast<std::size_t>(count), 0.0f);
  MatD sums(k, d);
  std::vector<Index> members(static_cast<std::size_t>(k), 0);

  double prev = std::numeric_limits<double>::infinity();
  for (Index iter = 0; iter < max_iters; ++iter) {
    // Assignment step; distortion accumulated in 64-bit.
    double distortion = 0;
    for (Index t = 0; t < count; ++t) {
      const auto [best, best_d] = nearest_codeword(table, t, cb.entries);
      assign[static_cast<std::size_t>(t)] = best;
      dist[static_cast<std::size_t>(t)] = best_d;
      distortion += best_d;
    }
    res.distortion_trace.push_back(distortion);
    res.iterations = iter + 1;

    const bool converged =
        prev < std::numeric_limits<double>::infinity() &&
        (prev - distortion) < tol * std::max(prev, std::numeric_limits<double>::min());
    prev = distortion;
    if (converged) break;

    // Update step: centers become member means (64-bit sums).
    sums.setZero();
    std::fill(members.begin(), members.end(), Index{0});
    for (Index t = 0; t < count; ++t) {
      const Index c = assign[static_cast<std::size_t>(t)];
      sums.row(c) += table.subvec(t).cast<double>();
      ++members[static_cast<std::size_t>(c)];
    }
    for (Index c = 0; c < k; ++c)
      if (members[static_cast<std::size_t>(c)] > 0)
        cb.entries.row(c) =
            (sums.row(c) / static_cast<double>(members[static_cast<std::size_t>(c)]))
                .cast<float>();

    // Empty-cluster repair: reseed at the sub-vector farthest from its center.
    for (Index c = 0; c < k; ++c) {
      if (members[static_cast<std::size_t>(c)] > 0) continue;
      Index far = 0;
      float far_d = -1.0f;
      for (Index t = 0; t < count; ++t) {
        if (dist[static_cast<std::size_t>(t)] > far_d) {
          far_d = dist[static_cast<std::size_t>(t)];
          far = t;
        }
      }
      cb.entries.row(c) = table.subvec(far);
      assign[static_cast<std::size_t>(far)] = c;
      dist[static_cast<std::size_t>(far)] = 0.0f;
      ++members[static_cast<std::size_t>(c)];
    }
  }

  res.assignments = nearest_assign(table, cb);
  res.distortion = assignment_distortion(table, cb, res.assignments);
  res.codebook = std::move(cb);
  return res;
}

Assignments nearest_assign(const SubVectorTable& table, const Codebook& cb) {
  if (cb.dim() != table.dim())
    throw ContractError("nearest_assign: codebook dim does not match table");
  Assignments a;
  a.indices.resize(table.rows(), table.slots());
  for (Index t = 0; t < table.count(); ++t) {
    const auto [best, best_d] = nearest_codeword(table, t, cb.entries);
    (void)best_d;
    a.indices(t / table.slots(), t % table.slots()) = static_cast<std::int32_t>(best);
  }
  return a;
}

double assignment_distortion(const SubVectorTable& table, const Codebook& cb,
                             const Assignments& a) {
  double total = 0;
  for (Index r = 0; r < a.rows(); ++r)
    for (Index s = 0; s < a.slots(); ++s)
      total += (table.subvec(r, s) - cb.entries.row(a.indices(r, s))).squaredNorm();
  return total;
}

}  // namespace vq

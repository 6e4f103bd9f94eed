#pragma once

#include "vq/types.hpp"

#include <cstdint>
#include <vector>

namespace vq {

/// Squared Euclidean distance between a sub-vector and one codeword,
/// accumulated in 32-bit like the rest of the pipeline.
inline float sqdist(Eigen::Map<const MatF>::ConstRowXpr a,
                    const Eigen::Ref<const Eigen::RowVectorXf>& b) {
  return (a - b).squaredNorm();
}

/// Distance-weighted (D^2) seeding. Deterministic for a fixed seed: the
/// first center is a uniform draw, each further center is picked by walking
/// the cumulative min-distance weights against one uniform variate. Falls
/// back to a uniform draw when every remaining point coincides with a center.
Codebook kmeanspp_seed(const SubVectorTable& table, Index k, std::uint64_t seed);

struct LloydResult {
  Codebook codebook;
  Assignments assignments;
  double distortion = 0;                  // sum of squared distances at convergence
  std::vector<double> distortion_trace;   // one entry per iteration, non-increasing
  Index iterations = 0;
};

/// Lloyd refinement. Stops when the relative distortion improvement drops
/// below `tol` or after `max_iters` iterations. Empty clusters are reseeded
/// at the sub-vector farthest from its current center.
LloydResult lloyd(const SubVectorTable& table, Codebook cb, Index max_iters, double tol);

/// Hard nearest-codeword assignment; ties resolved to the lowest index.
Assignments nearest_assign(const SubVectorTable& table, const Codebook& cb);

/// Sum of squared distances between each sub-vector and its assigned codeword.
double assignment_distortion(const SubVectorTable& table, const Codebook& cb,
                             const Assignments& a);

}  // namespace vq

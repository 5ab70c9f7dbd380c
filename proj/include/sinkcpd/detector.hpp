#pragma once

// Sliding-window change statistics and thresholded detection.

#include "sinkcpd/ot.hpp"

#include <vector>

namespace sinkcpd {

struct ChangeScoreSeries {
  std::vector<double> scores;     // length T; 0 where masked
  std::vector<bool> valid;        // false outside [first, last]
  std::vector<bool> interpolated; // step-held positions when stride > 1
  Index first = 0;                // first valid index (== window)
  Index last = -1;                // last valid index (== T - window)
  Index window = 0;
  Index stride = 1;

  Index length() const { return static_cast<Index>(scores.size()); }
};

/// Score at n is S(rows [n-w, n), rows [n, n+w)) with uniform weights.
/// Scored indices are the first valid index plus every valid multiple of
/// `stride`; the others carry the previous score. Self terms shared by
/// adjacent windows are solved once.
ChangeScoreSeries change_scores(const Matrix& sequence, const GroundMetric& metric, Index window,
                                Index stride = 1, const SolverConfig& solver = {});

/// Reference implementation: one independent sinkhorn_divergence call per
/// scored index.
ChangeScoreSeries change_scores_naive(const Matrix& sequence, const GroundMetric& metric,
                                      Index window, Index stride = 1,
                                      const SolverConfig& solver = {});

struct Detection {
  std::vector<Index> indices;
  double threshold = 0.0;
  Index min_separation = 0;  // 0 for the raw rule
};

/// Indices with score > tau that are peaks of their +-min_separation
/// neighborhood: no valid neighbor scores higher, no earlier neighbor ties,
/// and the neighborhood is not flat.
Detection detect(const ChangeScoreSeries& scores, double tau, Index min_separation);

/// Every valid index with score > tau.
Detection detect_raw(const ChangeScoreSeries& scores, double tau);

}  // namespace sinkcpd

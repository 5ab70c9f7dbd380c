#include "sinkcpd/detector.hpp"

#include "sinkcpd/error.hpp"
#include "sinkcpd/parallel.hpp"

#include <cmath>
#include <string>

namespace sinkcpd {

namespace {

void check_inputs(const Matrix& sequence, const GroundMetric& metric, Index window, Index stride) {
  metric.validate();
  if (window < 1) throw InputError("change_scores: window must be >= 1");
  if (stride < 1) throw InputError("change_scores: stride must be >= 1");
  if (sequence.cols() != metric.dim())
    throw InputError("change_scores: sequence dimension " + std::to_string(sequence.cols()) +
                     " != metric dimension " + std::to_string(metric.dim()));
  if (sequence.rows() < 2 * window)
    throw InputError("change_scores: sequence length " + std::to_string(sequence.rows()) +
                     " < 2 * window (" + std::to_string(2 * window) + ")");
  if (!sequence.allFinite()) throw InputError("change_scores: non-finite sequence entry");
}

ChangeScoreSeries empty_series(Index T, Index window, Index stride) {
  ChangeScoreSeries s;
  s.scores.assign(static_cast<std::size_t>(T), 0.0);
  s.valid.assign(static_cast<std::size_t>(T), false);
  s.interpolated.assign(static_cast<std::size_t>(T), false);
  s.first = window;
  s.last = T - window;
  s.window = window;
  s.stride = stride;
  for (Index n = s.first; n <= s.last; ++n) s.valid[static_cast<std::size_t>(n)] = true;
  return s;
}

std::vector<Index> scored_indices(const ChangeScoreSeries& s) {
  std::vector<Index> out;
  for (Index n = s.first; n <= s.last; ++n)
    if (n == s.first || n % s.stride == 0) out.push_back(n);
  return out;
}

void hold_between(ChangeScoreSeries& s) {
  double held = 0.0;
  for (Index n = s.first; n <= s.last; ++n) {
    const auto k = static_cast<std::size_t>(n);
    if (n == s.first || n % s.stride == 0) {
      held = s.scores[k];
    } else {
      s.scores[k] = held;
      s.interpolated[k] = true;
    }
  }
}

}  // namespace

ChangeScoreSeries change_scores(const Matrix& sequence, const GroundMetric& metric, Index window,
                                Index stride, const SolverConfig& solver) {
  check_inputs(sequence, metric, window, stride);
  const Index T = sequence.rows();
  ChangeScoreSeries s = empty_series(T, window, stride);
  const std::vector<Index> scored = scored_indices(s);

  // Project once; windows are row blocks of the projected sequence.
  const Matrix Z = project_rows(sequence, metric.effective_projection());
  const Vector weights = Vector::Constant(window, 1.0 / static_cast<double>(window));

  // W(B, B) for every window start B used as a past or future block.
  std::vector<char> needed(static_cast<std::size_t>(T), 0);
  for (Index n : scored) {
    needed[static_cast<std::size_t>(n - window)] = 1;
    needed[static_cast<std::size_t>(n)] = 1;
  }
  std::vector<Index> starts;
  for (Index b = 0; b < T; ++b)
    if (needed[static_cast<std::size_t>(b)]) starts.push_back(b);
  std::vector<double> self_value(static_cast<std::size_t>(T), 0.0);
  parallel_for(starts.size(), [&](std::size_t k) {
    const Index b = starts[k];
    const auto block = Z.middleRows(b, window);
    const Matrix Zb = block;
    self_value[static_cast<std::size_t>(b)] =
        sinkhorn_solve(pairwise_sq_dist(Zb, Zb), weights, weights, metric.gamma, solver).value;
  });

  parallel_for(scored.size(), [&](std::size_t k) {
    const Index n = scored[k];
    const Matrix past = Z.middleRows(n - window, window);
    const Matrix future = Z.middleRows(n, window);
    const double cross =
        sinkhorn_solve(pairwise_sq_dist(past, future), weights, weights, metric.gamma, solver).value;
    s.scores[static_cast<std::size_t>(n)] = cross -
                                            0.5 * self_value[static_cast<std::size_t>(n - window)] -
                                            0.5 * self_value[static_cast<std::size_t>(n)];
  });
  hold_between(s);
  return s;
}

ChangeScoreSeries change_scores_naive(const Matrix& sequence, const GroundMetric& metric,
                                      Index window, Index stride, const SolverConfig& solver) {
  check_inputs(sequence, metric, window, stride);
  ChangeScoreSeries s = empty_series(sequence.rows(), window, stride);
  for (Index n : scored_indices(s)) {
    const PointCloud past = PointCloud::uniform(sequence.middleRows(n - window, window));
    const PointCloud future = PointCloud::uniform(sequence.middleRows(n, window));
    s.scores[static_cast<std::size_t>(n)] = sinkhorn_divergence(past, future, metric, solver);
  }
  hold_between(s);
  return s;
}

Detection detect(const ChangeScoreSeries& scores, double tau, Index min_separation) {
  if (std::isnan(tau)) throw InputError("detect: threshold must not be NaN");
  if (min_separation < 1) throw InputError("detect: min_separation must be >= 1");
  Detection out;
  out.threshold = tau;
  out.min_separation = min_separation;
  const Index T = scores.length();
  for (Index n = 0; n < T; ++n) {
    const auto k = static_cast<std::size_t>(n);
    if (!scores.valid[k] || !(scores.scores[k] > tau)) continue;
    const double x = scores.scores[k];
    bool peak = true;
    bool flat = true;
    for (Index m = std::max<Index>(0, n - min_separation);
         m <= std::min<Index>(T - 1, n + min_separation) && peak; ++m) {
      const auto j = static_cast<std::size_t>(m);
      if (m == n || !scores.valid[j]) continue;
      const double y = scores.scores[j];
      if (y > x || (m < n && y == x)) peak = false;
      if (y != x) flat = false;
    }
    if (peak && !flat) out.indices.push_back(n);
  }
  return out;
}

Detection detect_raw(const ChangeScoreSeries& scores, double tau) {
  if (std::isnan(tau)) throw InputError("detect_raw: threshold must not be NaN");
  Detection out;
  out.threshold = tau;
  for (Index n = 0; n < scores.length(); ++n) {
    const auto k = static_cast<std::size_t>(n);
    if (scores.valid[k] && scores.scores[k] > tau) out.indices.push_back(n);
  }
  return out;
}

}  // namespace sinkcpd

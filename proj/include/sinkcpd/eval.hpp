#pragma once

// AUC scoring and two-sample error experiments.

#include "sinkcpd/detector.hpp"
#include "sinkcpd/metric_learn.hpp"
#include "sinkcpd/rng.hpp"

#include <functional>
#include <string>
#include <vector>

namespace sinkcpd {

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
  double tau = 0.0;
};

struct AucReport {
  double auc = 0.0;
  std::vector<RocPoint> roc_points;  // ordered by decreasing tau
  Index match_margin = 0;
};

/// Greedy one-to-one matching: detections are visited in order and each takes
/// the nearest unmatched truth within `margin` (ties go to the earlier truth).
/// Returns the number of matched detections.
std::size_t match_detections(const std::vector<Index>& detections, const std::vector<Index>& truth,
                             Index margin);

/// Exact ROC over every distinct valid score (plus +-inf). At threshold tau
/// the detections are the valid indices with score > tau;
/// TPR = matched / |truth| and FPR = unmatched / (valid indices - truths
/// among them). AUC by the trapezoid rule.
AucReport auc(const ChangeScoreSeries& scores, const std::vector<Index>& truth, Index match_margin);

/// Trapezoidal area of a ROC curve given in any tau order.
double trapezoid_auc(const std::vector<RocPoint>& roc);

enum class ErrorAxis { WindowSize, NoiseLevel, ProjectionDim };
const char* to_string(ErrorAxis axis);

struct ErrorPoint {
  double axis_value = 0.0;
  double tau = 0.0;
  double type1 = 0.0;
  double type2 = 0.0;
};

struct ErrorCurve {
  ErrorAxis axis = ErrorAxis::WindowSize;
  std::vector<ErrorPoint> points;
};

/// Draws one w x d cloud; the generator is dedicated to that draw.
using CloudSampler = std::function<Matrix(Index w, CounterRng& rng)>;

/// A metric together with the feature map it was trained under.
struct ScoringMetric {
  Standardizer standardizer;
  GroundMetric metric;

  static ScoringMetric plain(GroundMetric metric);
};

struct TwoSampleDraws {
  std::vector<double> null_scores;  // S(null, null')
  std::vector<double> alt_scores;   // S(null, alt)
};

/// n_trials independent divergence draws of each kind. Trial k uses
/// sub-streams derived from (seed, k) so results do not depend on threading.
TwoSampleDraws two_sample_draws(const CloudSampler& null_sampler, const CloudSampler& alt_sampler,
                                const ScoringMetric& scoring, Index window, std::size_t n_trials,
                                std::uint64_t seed, const SolverConfig& solver = {});

/// Type 1 = fraction of null scores > tau, Type 2 = fraction of alt scores
/// <= tau, over every distinct score plus +-inf, tau increasing.
ErrorCurve error_curve(const TwoSampleDraws& draws, ErrorAxis axis, double axis_value);

ErrorCurve two_sample_error_rates(const CloudSampler& null_sampler,
                                  const CloudSampler& alt_sampler, const ScoringMetric& scoring,
                                  Index window, std::size_t n_trials, std::uint64_t seed,
                                  ErrorAxis axis, double axis_value,
                                  const SolverConfig& solver = {});

/// Smallest Type 2 error reachable with Type 1 <= level.
double type2_at_type1(const ErrorCurve& curve, double level);

/// Fraction of Type-1 levels {0, 1/n, ..., 1} at which `candidate`'s Type 2
/// is <= `reference`'s.
double dominance_fraction(const ErrorCurve& candidate, const ErrorCurve& reference,
                          std::size_t n_levels);

/// Count of singular values > rel_tol * sigma_max.
Index numerical_rank(const Matrix& M, double rel_tol = 1e-8);

struct ProjectionStudyEntry {
  Index projection_dim = 0;
  bool trained = false;
  std::string error;      // set when training failed
  Index rank = 0;         // numerical rank of L^T L
  double tau = 0.0;       // calibrated threshold
  double type1 = 0.0;
  double type2 = 0.0;
};

struct ProjectionStudy {
  ErrorCurve curve;  // axis = ProjectionDim, one point per trained r
  std::vector<ProjectionStudyEntry> entries;
};

/// For each r in dims: train L on `train_seq` with `base` (projection_dim
/// replaced), then estimate Type 1 at the tau giving Type 2 = target_type2.
/// A failed training is recorded and the study continues.
ProjectionStudy projection_dim_study(const LabeledSequence& train_seq,
                                     const CloudSampler& null_sampler,
                                     const CloudSampler& alt_sampler,
                                     const std::vector<Index>& dims, const TrainConfig& base,
                                     Index window, std::size_t n_trials, std::uint64_t seed,
                                     double target_type2 = 0.1);

}  // namespace sinkcpd

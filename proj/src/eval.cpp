#include "sinkcpd/eval.hpp"

#include "sinkcpd/error.hpp"
#include "sinkcpd/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace sinkcpd {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

std::size_t match_detections(const std::vector<Index>& detections, const std::vector<Index>& truth,
                             Index margin) {
  std::vector<char> taken(truth.size(), 0);
  std::size_t matched = 0;
  for (Index det : detections) {
    // truth is sorted; scan the window [det - margin, det + margin].
    auto it = std::lower_bound(truth.begin(), truth.end(), det - margin);
    std::ptrdiff_t best = -1;
    Index best_dist = margin + 1;
    for (; it != truth.end() && *it <= det + margin; ++it) {
      const auto k = it - truth.begin();
      if (taken[static_cast<std::size_t>(k)]) continue;
      const Index dist = std::abs(*it - det);
      if (dist < best_dist) {
        best_dist = dist;
        best = k;
      }
    }
    if (best >= 0) {
      taken[static_cast<std::size_t>(best)] = 1;
      ++matched;
    }
  }
  return matched;
}

double trapezoid_auc(const std::vector<RocPoint>& roc) {
  std::vector<RocPoint> pts = roc;
  std::sort(pts.begin(), pts.end(), [](const RocPoint& a, const RocPoint& b) {
    return a.fpr < b.fpr || (a.fpr == b.fpr && a.tpr < b.tpr);
  });
  double area = 0.0;
  for (std::size_t k = 1; k < pts.size(); ++k)
    area += (pts[k].fpr - pts[k - 1].fpr) * 0.5 * (pts[k].tpr + pts[k - 1].tpr);
  return area;
}

AucReport auc(const ChangeScoreSeries& scores, const std::vector<Index>& truth_in,
              Index match_margin) {
  if (truth_in.empty()) throw InputError("auc: empty truth set");
  if (match_margin < 0) throw InputError("auc: match_margin must be >= 0");
  std::vector<Index> truth = truth_in;
  std::sort(truth.begin(), truth.end());
  truth.erase(std::unique(truth.begin(), truth.end()), truth.end());

  std::vector<Index> valid_idx;
  std::set<double> distinct;
  for (Index n = 0; n < scores.length(); ++n) {
    const auto k = static_cast<std::size_t>(n);
    if (!scores.valid[k]) continue;
    valid_idx.push_back(n);
    distinct.insert(scores.scores[k]);
  }
  std::size_t truths_scored = 0;
  for (Index t : truth)
    if (t >= 0 && t < scores.length() && scores.valid[static_cast<std::size_t>(t)]) ++truths_scored;
  const double negatives =
      std::max<double>(1.0, static_cast<double>(valid_idx.size() - truths_scored));
  const double positives = static_cast<double>(truth.size());

  std::vector<double> taus;
  taus.push_back(kInf);
  for (auto it = distinct.rbegin(); it != distinct.rend(); ++it) taus.push_back(*it);
  taus.push_back(-kInf);

  AucReport report;
  report.match_margin = match_margin;
  std::vector<Index> detections;
  for (double tau : taus) {
    detections.clear();
    for (Index n : valid_idx)
      if (scores.scores[static_cast<std::size_t>(n)] > tau) detections.push_back(n);
    const std::size_t matched = match_detections(detections, truth, match_margin);
    const double fp = static_cast<double>(detections.size() - matched);
    report.roc_points.push_back(
        {std::min(1.0, fp / negatives), static_cast<double>(matched) / positives, tau});
  }
  report.auc = trapezoid_auc(report.roc_points);
  return report;
}

const char* to_string(ErrorAxis axis) {
  switch (axis) {
    case ErrorAxis::WindowSize: return "window_size";
    case ErrorAxis::NoiseLevel: return "noise_level";
    case ErrorAxis::ProjectionDim: return "projection_dim";
  }
  return "?";
}

ScoringMetric ScoringMetric::plain(GroundMetric metric) {
  const Index d = metric.dim();
  return ScoringMetric{Standardizer::identity(d), std::move(metric)};
}

TwoSampleDraws two_sample_draws(const CloudSampler& null_sampler, const CloudSampler& alt_sampler,
                                const ScoringMetric& scoring, Index window, std::size_t n_trials,
                                std::uint64_t seed, const SolverConfig& solver) {
  if (n_trials == 0) throw InputError("two_sample_error_rates: n_trials must be >= 1");
  if (window < 1) throw InputError("two_sample_error_rates: window must be >= 1");
  TwoSampleDraws draws;
  draws.null_scores.resize(n_trials);
  draws.alt_scores.resize(n_trials);
  const CounterRng base(seed, /*stream=*/0x2A11);
  parallel_for(n_trials, [&](std::size_t k) {
    CounterRng rng = base.split(k);
    const Matrix x = null_sampler(window, rng);
    const Matrix x2 = null_sampler(window, rng);
    const Matrix y = alt_sampler(window, rng);
    const auto cloud = [&](const Matrix& m) {
      return PointCloud::uniform(scoring.standardizer.apply(m));
    };
    const PointCloud cx = cloud(x);
    draws.null_scores[k] = sinkhorn_divergence(cx, cloud(x2), scoring.metric, solver);
    draws.alt_scores[k] = sinkhorn_divergence(cx, cloud(y), scoring.metric, solver);
  });
  return draws;
}

ErrorCurve error_curve(const TwoSampleDraws& draws, ErrorAxis axis, double axis_value) {
  std::vector<double> null_sorted = draws.null_scores;
  std::vector<double> alt_sorted = draws.alt_scores;
  std::sort(null_sorted.begin(), null_sorted.end());
  std::sort(alt_sorted.begin(), alt_sorted.end());
  std::set<double> taus(null_sorted.begin(), null_sorted.end());
  taus.insert(alt_sorted.begin(), alt_sorted.end());
  taus.insert(-kInf);
  taus.insert(kInf);

  const double n_null = static_cast<double>(null_sorted.size());
  const double n_alt = static_cast<double>(alt_sorted.size());
  ErrorCurve curve;
  curve.axis = axis;
  for (double tau : taus) {
    const auto null_above =
        null_sorted.end() - std::upper_bound(null_sorted.begin(), null_sorted.end(), tau);
    const auto alt_at_or_below =
        std::upper_bound(alt_sorted.begin(), alt_sorted.end(), tau) - alt_sorted.begin();
    curve.points.push_back({axis_value, tau, static_cast<double>(null_above) / n_null,
                            static_cast<double>(alt_at_or_below) / n_alt});
  }
  return curve;
}

ErrorCurve two_sample_error_rates(const CloudSampler& null_sampler,
                                  const CloudSampler& alt_sampler, const ScoringMetric& scoring,
                                  Index window, std::size_t n_trials, std::uint64_t seed,
                                  ErrorAxis axis, double axis_value, const SolverConfig& solver) {
  return error_curve(
      two_sample_draws(null_sampler, alt_sampler, scoring, window, n_trials, seed, solver), axis,
      axis_value);
}

double type2_at_type1(const ErrorCurve& curve, double level) {
  double best = 1.0;
  for (const auto& p : curve.points)
    if (p.type1 <= level + 1e-12) best = std::min(best, p.type2);
  return best;
}

double dominance_fraction(const ErrorCurve& candidate, const ErrorCurve& reference,
                          std::size_t n_levels) {
  if (n_levels == 0) throw InputError("dominance_fraction: n_levels must be >= 1");
  std::size_t wins = 0;
  for (std::size_t j = 0; j <= n_levels; ++j) {
    const double level = static_cast<double>(j) / static_cast<double>(n_levels);
    if (type2_at_type1(candidate, level) <= type2_at_type1(reference, level) + 1e-12) ++wins;
  }
  return static_cast<double>(wins) / static_cast<double>(n_levels + 1);
}

Index numerical_rank(const Matrix& M, double rel_tol) {
  if (M.size() == 0) return 0;
  Eigen::JacobiSVD<Matrix> svd(M);
  const Vector& s = svd.singularValues();
  const double top = s.size() > 0 ? s(0) : 0.0;
  if (!(top > 0.0)) return 0;
  Index rank = 0;
  for (Index k = 0; k < s.size(); ++k)
    if (s(k) > rel_tol * top) ++rank;
  return rank;
}

ProjectionStudy projection_dim_study(const LabeledSequence& train_seq,
                                     const CloudSampler& null_sampler,
                                     const CloudSampler& alt_sampler,
                                     const std::vector<Index>& dims, const TrainConfig& base,
                                     Index window, std::size_t n_trials, std::uint64_t seed,
                                     double target_type2) {
  if (dims.empty()) throw InputError("projection_dim_study: dims must be nonempty");
  ProjectionStudy study;
  study.curve.axis = ErrorAxis::ProjectionDim;
  for (Index r : dims) {
    ProjectionStudyEntry entry;
    entry.projection_dim = r;
    try {
      TrainConfig cfg = base;
      cfg.projection_dim = r;
      const TrainedModel model = train_metric(train_seq, cfg);
      entry.trained = true;
      entry.rank = numerical_rank(model.metric.L.transpose() * model.metric.L);
      const ScoringMetric scoring{model.standardizer, model.metric};
      const ErrorCurve curve =
          two_sample_error_rates(null_sampler, alt_sampler, scoring, window, n_trials, seed,
                                 ErrorAxis::ProjectionDim, static_cast<double>(r), base.solver);
      // Largest tau whose Type 2 stays within the target.
      const ErrorPoint* chosen = &curve.points.front();
      for (const auto& p : curve.points)
        if (p.type2 <= target_type2 + 1e-12) chosen = &p;
      entry.tau = chosen->tau;
      entry.type1 = chosen->type1;
      entry.type2 = chosen->type2;
      study.curve.points.push_back({static_cast<double>(r), entry.tau, entry.type1, entry.type2});
    } catch (const std::exception& e) {
      entry.trained = false;
      entry.error = e.what();
    }
    study.entries.push_back(entry);
  }
  return study;
}

}  // namespace sinkcpd

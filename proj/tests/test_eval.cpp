#include "oracles.hpp"

#include "sinkcpd/datagen.hpp"
#include "sinkcpd/error.hpp"
#include "sinkcpd/eval.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

using namespace sinkcpd;

namespace {

ChangeScoreSeries series_from(const std::vector<double>& values) {
  ChangeScoreSeries s;
  s.scores = values;
  s.valid.assign(values.size(), true);
  s.interpolated.assign(values.size(), false);
  s.first = 0;
  s.last = static_cast<Index>(values.size()) - 1;
  s.window = 1;
  return s;
}

// Every distinct threshold with detections = indices scoring above it.
double brute_force_auc(const std::vector<double>& scores, const std::vector<Index>& truth) {
  std::set<double> taus(scores.begin(), scores.end());
  taus.insert(-std::numeric_limits<double>::infinity());
  std::vector<std::pair<double, double>> pts;  // (fpr, tpr)
  const double negatives = static_cast<double>(scores.size() - truth.size());
  for (double tau : taus) {
    double tp = 0.0, fp = 0.0;
    for (std::size_t n = 0; n < scores.size(); ++n) {
      if (!(scores[n] > tau)) continue;
      const bool is_truth =
          std::find(truth.begin(), truth.end(), static_cast<Index>(n)) != truth.end();
      (is_truth ? tp : fp) += 1.0;
    }
    pts.emplace_back(fp / negatives, tp / static_cast<double>(truth.size()));
  }
  pts.emplace_back(0.0, 0.0);
  std::sort(pts.begin(), pts.end());
  double area = 0.0;
  for (std::size_t k = 1; k < pts.size(); ++k)
    area += (pts[k].first - pts[k - 1].first) * (pts[k].second + pts[k - 1].second) / 2.0;
  return area;
}

std::vector<double> random_scores(std::size_t n, CounterRng& rng, bool coarse) {
  std::vector<double> s(n);
  for (auto& x : s) x = coarse ? static_cast<double>(rng.below(4)) : rng.normal();
  return s;
}

CloudSampler constant_cloud(Index d, double value) {
  return [d, value](Index w, CounterRng&) { return Matrix::Constant(w, d, value); };
}

CloudSampler gaussian_cloud(Index d, double mean) {
  return [d, mean](Index w, CounterRng& rng) {
    Matrix m(w, d);
    for (Index i = 0; i < w; ++i)
      for (Index j = 0; j < d; ++j) m(i, j) = rng.normal(mean, 1.0);
    return m;
  };
}

}  // namespace

TEST(MatchDetections, GreedyOneToOne) {
  EXPECT_EQ(match_detections({10, 11, 30}, {10, 31}, 0), 1u);
  EXPECT_EQ(match_detections({10, 11, 30}, {10, 31}, 1), 2u);
  // a truth is consumed once
  EXPECT_EQ(match_detections({9, 11}, {10}, 1), 1u);
  EXPECT_EQ(match_detections({}, {10}, 3), 0u);
}

TEST(Auc, PerfectScores) {
  std::vector<double> v(20, 0.0);
  v[4] = v[12] = 1.0;
  const auto r = auc(series_from(v), {4, 12}, 0);
  EXPECT_DOUBLE_EQ(r.auc, 1.0);
}

TEST(Auc, ConstantScoresGiveHalf) {
  const auto r = auc(series_from(std::vector<double>(30, 0.7)), {3, 17}, 0);
  EXPECT_DOUBLE_EQ(r.auc, 0.5);
}

TEST(Auc, HandCase) {
  const std::vector<double> v{0, 0, .1, 0, 0, .9, 0, .5, 0, 0};
  const auto r = auc(series_from(v), {5}, 0);
  EXPECT_DOUBLE_EQ(r.auc, brute_force_auc(v, {5}));
  EXPECT_DOUBLE_EQ(r.auc, 1.0);
  const auto low = auc(series_from(v), {7}, 0);
  EXPECT_NEAR(low.auc, brute_force_auc(v, {7}), 1e-15);
  EXPECT_NEAR(low.auc, 8.0 / 9.0, 1e-15);
}

TEST(Auc, EmptyTruthThrows) {
  EXPECT_THROW(auc(series_from({0, 1, 0}), {}, 0), InputError);
}

TEST(Auc, MatchesMannWhitneyAndBruteForce) {
  CounterRng rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    const bool coarse = trial % 2 == 1;
    const auto v = random_scores(60, rng, coarse);
    std::vector<Index> truth;
    for (Index n = 3; n < 60; n += 7 + static_cast<Index>(rng.below(5))) truth.push_back(n);
    std::vector<double> pos, neg;
    for (std::size_t n = 0; n < v.size(); ++n)
      (std::find(truth.begin(), truth.end(), static_cast<Index>(n)) != truth.end() ? pos : neg)
          .push_back(v[n]);
    const auto r = auc(series_from(v), truth, 0);
    EXPECT_NEAR(r.auc, oracle::mann_whitney_auc(pos, neg), 1e-12);
    EXPECT_NEAR(r.auc, brute_force_auc(v, truth), 1e-12);
  }
}

TEST(Auc, StoredCurveInvariants) {
  CounterRng rng(2);
  const auto v = random_scores(80, rng, false);
  const auto r = auc(series_from(v), {10, 40, 41, 70}, 2);
  EXPECT_NEAR(r.auc, trapezoid_auc(r.roc_points), 1e-12);
  EXPECT_GE(r.auc, 0.0);
  EXPECT_LE(r.auc, 1.0);
  for (std::size_t k = 1; k < r.roc_points.size(); ++k) {
    EXPECT_LT(r.roc_points[k].tau, r.roc_points[k - 1].tau);
    EXPECT_GE(r.roc_points[k].fpr, r.roc_points[k - 1].fpr);
    EXPECT_GE(r.roc_points[k].tpr, r.roc_points[k - 1].tpr);
  }
  EXPECT_EQ(r.match_margin, 2);
}

TEST(Auc, MonotoneTransformAndSignFlip) {
  CounterRng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const auto v = random_scores(50, rng, trial % 2 == 0);
    const std::vector<Index> truth{5, 20, 33};
    const double base = auc(series_from(v), truth, 0).auc;
    std::vector<double> warped(v.size()), flipped(v.size());
    std::transform(v.begin(), v.end(), warped.begin(), [](double x) { return std::exp(3.0 * x) + 1.0; });
    std::transform(v.begin(), v.end(), flipped.begin(), [](double x) { return -x; });
    EXPECT_NEAR(auc(series_from(warped), truth, 0).auc, base, 1e-12);
    EXPECT_NEAR(auc(series_from(flipped), truth, 0).auc, 1.0 - base, 1e-12);
  }
}

TEST(Auc, MaskedIndicesIgnored) {
  auto s = series_from({9, 0, 0, 1, 0, 0, 9});
  s.valid[0] = s.valid[6] = false;
  EXPECT_DOUBLE_EQ(auc(s, {3}, 0).auc, 1.0);
}

TEST(ErrorRates, ConstantCloudsHaveNoFalseAlarms) {
  const auto curve = two_sample_error_rates(constant_cloud(2, 1.0), constant_cloud(2, 1.0),
                                            ScoringMetric::plain(GroundMetric::identity(2, 0.5)),
                                            5, 20, 1, ErrorAxis::WindowSize, 5.0);
  for (const auto& p : curve.points)
    if (p.tau > 1e-9) EXPECT_EQ(p.type1, 0.0);
}

TEST(ErrorRates, SingleTrialIsBinary) {
  const auto curve = two_sample_error_rates(gaussian_cloud(2, 0.0), gaussian_cloud(2, 1.0),
                                            ScoringMetric::plain(GroundMetric::identity(2, 0.5)),
                                            5, 1, 2, ErrorAxis::NoiseLevel, 0.0);
  for (const auto& p : curve.points) {
    EXPECT_TRUE(p.type1 == 0.0 || p.type1 == 1.0);
    EXPECT_TRUE(p.type2 == 0.0 || p.type2 == 1.0);
  }
}

TEST(ErrorRates, MonotoneBoundedAndDeterministic) {
  const auto scoring = ScoringMetric::plain(GroundMetric::identity(3, 0.5));
  const auto a = two_sample_error_rates(gaussian_cloud(3, 0.0), gaussian_cloud(3, 0.7), scoring,
                                        8, 60, 3, ErrorAxis::WindowSize, 8.0);
  const auto b = two_sample_error_rates(gaussian_cloud(3, 0.0), gaussian_cloud(3, 0.7), scoring,
                                        8, 60, 3, ErrorAxis::WindowSize, 8.0);
  ASSERT_EQ(a.points.size(), b.points.size());
  for (std::size_t k = 0; k < a.points.size(); ++k) {
    EXPECT_EQ(a.points[k].type1, b.points[k].type1);
    EXPECT_EQ(a.points[k].type2, b.points[k].type2);
    EXPECT_GE(a.points[k].type1, 0.0);
    EXPECT_LE(a.points[k].type1, 1.0);
    EXPECT_GE(a.points[k].type2, 0.0);
    EXPECT_LE(a.points[k].type2, 1.0);
    EXPECT_EQ(a.points[k].axis_value, 8.0);
    if (k > 0) {
      EXPECT_GE(a.points[k].tau, a.points[k - 1].tau);
      EXPECT_LE(a.points[k].type1, a.points[k - 1].type1);
      EXPECT_GE(a.points[k].type2, a.points[k - 1].type2);
    }
  }
  EXPECT_EQ(a.axis, ErrorAxis::WindowSize);
}

TEST(ErrorRates, ZeroTrialsThrows) {
  EXPECT_THROW(two_sample_error_rates(gaussian_cloud(2, 0.0), gaussian_cloud(2, 1.0),
                                      ScoringMetric::plain(GroundMetric::identity(2, 0.5)), 5, 0,
                                      1, ErrorAxis::WindowSize, 5.0),
               InputError);
}

TEST(ErrorRates, TypeTwoAtTypeOneAndDominance) {
  ErrorCurve good, bad;
  // tau increasing: type1 falls, type2 rises
  good.points = {{0, -1, 1.0, 0.0}, {0, 0.5, 0.1, 0.0}, {0, 1, 0.0, 0.2}, {0, 2, 0.0, 1.0}};
  bad.points = {{0, -1, 1.0, 0.0}, {0, 0.5, 0.5, 0.3}, {0, 1, 0.0, 0.6}, {0, 2, 0.0, 1.0}};
  EXPECT_DOUBLE_EQ(type2_at_type1(good, 0.0), 0.2);
  EXPECT_DOUBLE_EQ(type2_at_type1(good, 0.1), 0.0);
  EXPECT_DOUBLE_EQ(type2_at_type1(bad, 0.2), 0.6);
  EXPECT_DOUBLE_EQ(dominance_fraction(good, bad, 10), 1.0);
  EXPECT_LT(dominance_fraction(bad, good, 10), 0.5);
  EXPECT_DOUBLE_EQ(dominance_fraction(good, good, 10), 1.0);
}

TEST(NumericalRank, Examples) {
  EXPECT_EQ(numerical_rank(Matrix::Zero(3, 3)), 0);
  EXPECT_EQ(numerical_rank(Matrix::Identity(4, 4)), 4);
  Matrix v(3, 1);
  v << 1, 2, 3;
  EXPECT_EQ(numerical_rank(v * v.transpose()), 1);
  CounterRng rng(4);
  Matrix L(1000, 100);
  for (Index i = 0; i < L.rows(); ++i)
    for (Index j = 0; j < L.cols(); ++j) L(i, j) = rng.normal();
  EXPECT_LE(numerical_rank(L.transpose() * L), 100);
  EXPECT_EQ(numerical_rank(L.topRows(1).transpose() * L.topRows(1)), 1);
}

TEST(ProjectionStudy, RecordsRanksAndFailures) {
  GenSpec spec;
  spec.dataset = Dataset::SwitchingGmm;
  spec.n_changes = 6;
  spec.dim = 6;
  spec.seed = 3;
  const auto seq = generate(spec);
  TrainConfig base;
  base.window = 10;
  base.iterations = 5;
  auto alpha = [](Index w, CounterRng& rng) { return sample_gmm_alpha(w, 6, 0.0, rng); };
  auto beta = [](Index w, CounterRng& rng) { return sample_gmm_beta(w, 6, 0.0, rng); };
  const auto study = projection_dim_study(seq, alpha, beta, {1, 3, 12}, base, 10, 30, 5);
  ASSERT_EQ(study.entries.size(), 3u);
  EXPECT_TRUE(study.entries[0].trained);
  EXPECT_EQ(study.entries[0].rank, 1);
  EXPECT_LE(study.entries[2].rank, 6);
  for (const auto& e : study.entries) {
    EXPECT_GE(e.type1, 0.0);
    EXPECT_LE(e.type1, 1.0);
  }
  EXPECT_EQ(study.curve.axis, ErrorAxis::ProjectionDim);

  TrainConfig broken = base;
  broken.learn_rate = 1e300;
  broken.margin = 100.0;
  const auto failed = projection_dim_study(seq, alpha, beta, {2}, broken, 10, 10, 5);
  ASSERT_EQ(failed.entries.size(), 1u);
  EXPECT_FALSE(failed.entries[0].trained);
  EXPECT_FALSE(failed.entries[0].error.empty());
}

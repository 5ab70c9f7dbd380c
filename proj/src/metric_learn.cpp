#include "sinkcpd/metric_learn.hpp"

#include "sinkcpd/error.hpp"
#include "sinkcpd/parallel.hpp"
#include "sinkcpd/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <string>

namespace sinkcpd {

void LabeledSequence::validate() const {
  if (data.rows() < 1 || data.cols() < 1) throw InputError("LabeledSequence: empty data");
  if (!data.allFinite()) throw InputError("LabeledSequence: non-finite data entry");
  for (std::size_t k = 0; k < change_points.size(); ++k) {
    const Index c = change_points[k];
    if (c < 0 || c >= data.rows())
      throw InputError("LabeledSequence: change point " + std::to_string(c) + " out of bounds");
    if (k > 0 && c <= change_points[k - 1])
      throw InputError("LabeledSequence: change points must be strictly increasing");
  }
}

TripletSet make_triplets(const LabeledSequence& seq, Index window, Index buffer) {
  seq.validate();
  if (window < 1) throw InputError("make_triplets: window must be >= 1");
  if (buffer < 0) throw InputError("make_triplets: buffer must be >= 0");
  const Index T = seq.length();
  const Index w = window;
  const Index b = buffer;

  TripletSet out;
  const auto& cps = seq.change_points;
  for (std::size_t k = 0; k < cps.size(); ++k) {
    const Index n = cps[k];
    const Index lo = n - b - 2 * w;
    const Index hi = n + b + 2 * w;
    const bool in_bounds = lo >= 0 && hi <= T;
    const bool crowded = (k > 0 && cps[k - 1] > lo) || (k + 1 < cps.size() && cps[k + 1] < hi);
    if (!in_bounds || crowded) {
      ++out.skipped;
      continue;
    }
    const Window p1{n - b - 2 * w, w};
    const Window p2{n - b - w, w};
    const Window f1{n + b, w};
    const Window f2{n + b + w, w};
    out.triplets.push_back({p2, p1, f1, n});
    out.triplets.push_back({p1, p2, f2, n});
    out.triplets.push_back({f1, f2, p2, n});
    out.triplets.push_back({f2, f1, p1, n});
    out.change_points.push_back(n);
  }
  if (out.triplets.empty())
    throw InputError("make_triplets: no usable change points (each needs " +
                     std::to_string(b + 2 * w) +
                     " clean samples on both sides; sequence length " + std::to_string(T) +
                     ", " + std::to_string(cps.size()) + " labels)");
  return out;
}

TripletSet select_change_points(const TripletSet& all, const std::vector<Index>& change_points) {
  const std::set<Index> keep(change_points.begin(), change_points.end());
  TripletSet out;
  for (const auto& t : all.triplets)
    if (keep.count(t.change_point)) out.triplets.push_back(t);
  for (Index c : all.change_points)
    if (keep.count(c)) out.change_points.push_back(c);
  return out;
}

// ---------------------------------------------------------------------------

TripletObjective::TripletObjective(const Matrix& data, TripletSet triplets, double gamma,
                                   double margin, SolverConfig solver)
    : data_(data), triplets_(std::move(triplets)), gamma_(gamma), margin_(margin),
      solver_(solver) {
  if (!(gamma > 0.0)) throw InputError("TripletObjective: gamma must be > 0");
  for (const auto& t : triplets_.triplets) {
    for (const Window* w : {&t.anchor, &t.similar, &t.dissimilar})
      if (w->start < 0 || w->length < 1 || w->end() > data_.rows())
        throw InputError("TripletObjective: window [" + std::to_string(w->start) + ", " +
                         std::to_string(w->end()) + ") outside the sequence");
    TripletRef ref{};
    ref.anchor = window_id(t.anchor);
    ref.similar = window_id(t.similar);
    ref.dissimilar = window_id(t.dissimilar);
    ref.similar_pair = pair_id(ref.anchor, ref.similar);
    ref.dissimilar_pair = pair_id(ref.anchor, ref.dissimilar);
    refs_.push_back(ref);
  }
  for (const auto& w : windows_) window_points_.push_back(data_.middleRows(w.start, w.length));
}

std::size_t TripletObjective::window_id(const Window& w) {
  for (std::size_t k = 0; k < windows_.size(); ++k)
    if (windows_[k] == w) return k;
  windows_.push_back(w);
  return windows_.size() - 1;
}

std::size_t TripletObjective::pair_id(std::size_t a, std::size_t b) {
  const std::size_t lo = std::min(a, b);
  const std::size_t hi = std::max(a, b);
  for (std::size_t k = 0; k < pairs_.size(); ++k)
    if (pairs_[k].first == lo && pairs_[k].second == hi) return k;
  pairs_.push_back({lo, hi});
  return pairs_.size() - 1;
}

TripletObjective::Evaluation TripletObjective::evaluate(const Matrix& L, GradMode mode,
                                                        bool with_gradient) {
  if (L.cols() != data_.cols())
    throw InputError("TripletObjective: L has " + std::to_string(L.cols()) +
                     " columns but the data has dimension " + std::to_string(data_.cols()));
  const GroundMetric metric{L, gamma_};
  metric.validate();
  const Matrix R = metric.effective_projection();

  const std::size_t nw = windows_.size();
  const std::size_t np = pairs_.size();
  std::vector<Matrix> projected(nw);
  for (std::size_t k = 0; k < nw; ++k) projected[k] = project_rows(window_points_[k], R);

  std::vector<SinkhornResult> self_next(nw);
  std::vector<SinkhornResult> pair_next(np);
  const bool warm = self_results_.size() == nw && pair_results_.size() == np;
  parallel_for(nw + np, [&](std::size_t job) {
    if (job < nw) {
      const Vector wts = Vector::Constant(windows_[job].length, 1.0 / windows_[job].length);
      self_next[job] = sinkhorn_solve(pairwise_sq_dist(projected[job], projected[job]), wts, wts,
                                      gamma_, solver_,
                                      warm ? &self_results_[job].potentials : nullptr);
    } else {
      const std::size_t p = job - nw;
      const auto& pr = pairs_[p];
      const Vector wa =
          Vector::Constant(windows_[pr.first].length, 1.0 / windows_[pr.first].length);
      const Vector wb =
          Vector::Constant(windows_[pr.second].length, 1.0 / windows_[pr.second].length);
      pair_next[p] = sinkhorn_solve(pairwise_sq_dist(projected[pr.first], projected[pr.second]),
                                    wa, wb, gamma_, solver_,
                                    warm ? &pair_results_[p].potentials : nullptr);
    }
  });
  self_results_ = std::move(self_next);
  pair_results_ = std::move(pair_next);

  auto divergence = [&](std::size_t pair) {
    const auto& pr = pairs_[pair];
    return pair_results_[pair].value - 0.5 * self_results_[pr.first].value -
           0.5 * self_results_[pr.second].value;
  };

  Evaluation ev;
  auto& res = ev.loss;
  res.similar_divergence.resize(refs_.size());
  res.dissimilar_divergence.resize(refs_.size());
  for (std::size_t t = 0; t < refs_.size(); ++t) {
    const double s_sim = divergence(refs_[t].similar_pair);
    const double s_dis = divergence(refs_[t].dissimilar_pair);
    res.similar_divergence[t] = s_sim;
    res.dissimilar_divergence[t] = s_dis;
    const double hinge = margin_ - (s_dis - s_sim);
    if (hinge > 0.0) {
      res.loss += hinge;
      res.violations.push_back(t);
    }
  }
  if (with_gradient) ev.gradient = gradient_for(L, res.violations, mode);
  return ev;
}

Matrix TripletObjective::gradient_for(const Matrix& L, const std::vector<std::size_t>& violations,
                                      GradMode mode) const {
  if (pair_results_.size() != pairs_.size())
    throw InputError("TripletObjective::gradient_for: evaluate() has not been called");
  std::vector<double> pair_coef(pairs_.size(), 0.0);
  std::vector<double> self_coef(windows_.size(), 0.0);
  for (std::size_t t : violations) {
    if (t >= refs_.size()) throw InputError("gradient_for: violation index out of range");
    const auto& r = refs_[t];
    pair_coef[r.similar_pair] += 1.0;
    pair_coef[r.dissimilar_pair] -= 1.0;
    if (mode == GradMode::FullDebiased) {
      // -1/2 W(a,a) appears in both divergences and cancels.
      self_coef[r.similar] -= 0.5;
      self_coef[r.dissimilar] += 0.5;
    }
  }
  const Index d = data_.cols();
  Matrix G = Matrix::Zero(d, d);
  for (std::size_t p = 0; p < pairs_.size(); ++p) {
    if (pair_coef[p] == 0.0) continue;
    const auto& pr = pairs_[p];
    G += pair_coef[p] * plan_second_moment(window_points_[pr.first], window_points_[pr.second],
                                           pair_results_[p].plan.plan);
  }
  for (std::size_t k = 0; k < windows_.size(); ++k) {
    if (self_coef[k] == 0.0) continue;
    G += self_coef[k] *
         plan_second_moment(window_points_[k], window_points_[k], self_results_[k].plan.plan);
  }
  return 2.0 * L * G;
}

TripletLossResult triplet_loss(const Matrix& L, const Matrix& data, const TripletSet& triplets,
                               double gamma, double margin, const SolverConfig& solver) {
  TripletObjective objective(data, triplets, gamma, margin, solver);
  return objective.evaluate(L, GradMode::CrossOnly, false).loss;
}

Matrix loss_gradient(const Matrix& L, const Matrix& data, const TripletSet& triplets,
                     const std::vector<std::size_t>& violations, double gamma, GradMode mode,
                     const SolverConfig& solver) {
  TripletObjective objective(data, triplets, gamma, 1.0, solver);
  objective.evaluate(L, mode, false);
  return objective.gradient_for(L, violations, mode);
}

// ---------------------------------------------------------------------------

const char* to_string(InitScheme scheme) {
  switch (scheme) {
    case InitScheme::Auto: return "auto";
    case InitScheme::IdentityLike: return "identity_like";
    case InitScheme::ScaledGaussian: return "scaled_gaussian";
  }
  return "?";
}

InitScheme init_scheme_from_string(const std::string& name) {
  if (name == "auto") return InitScheme::Auto;
  if (name == "identity_like" || name == "identity") return InitScheme::IdentityLike;
  if (name == "scaled_gaussian" || name == "gaussian") return InitScheme::ScaledGaussian;
  throw InputError("unknown init scheme '" + name + "'");
}

const char* to_string(LossReduction reduction) {
  return reduction == LossReduction::Mean ? "mean" : "sum";
}

LossReduction loss_reduction_from_string(const std::string& name) {
  if (name == "mean") return LossReduction::Mean;
  if (name == "sum") return LossReduction::Sum;
  throw InputError("unknown loss reduction '" + name + "' (expected mean or sum)");
}

Matrix init_metric(Index r, Index d, InitScheme scheme, std::uint64_t seed) {
  if (r < 1 || d < 1) throw InputError("init_metric: r and d must be >= 1");
  if (scheme == InitScheme::Auto)
    scheme = r <= d ? InitScheme::IdentityLike : InitScheme::ScaledGaussian;
  if (scheme == InitScheme::IdentityLike) {
    if (r > d)
      throw InputError("init_metric: identity_like needs r <= d (r=" + std::to_string(r) +
                       ", d=" + std::to_string(d) + ")");
    return Matrix::Identity(r, d);
  }
  CounterRng rng(seed, /*stream=*/0x11A7);
  const double sd = 1.0 / std::sqrt(static_cast<double>(d));
  Matrix L(r, d);
  for (Index i = 0; i < r; ++i)
    for (Index j = 0; j < d; ++j) L(i, j) = sd * rng.normal();
  return L;
}

Matrix soft_threshold(const Matrix& x, double t) {
  return x.unaryExpr([t](double v) {
    if (v > t) return v - t;
    if (v < -t) return v + t;
    return 0.0;
  });
}

Matrix proximal_step(const Matrix& L, const Matrix& grad, double learn_rate, double l1_weight) {
  Matrix next = L - learn_rate * grad;
  if (l1_weight > 0.0) next = soft_threshold(next, learn_rate * l1_weight);
  return next;
}

void TrainConfig::validate() const {
  if (projection_dim < 1) throw InputError("TrainConfig: projection_dim must be >= 1");
  if (!(gamma > 0.0)) throw InputError("TrainConfig: gamma must be > 0");
  if (!(learn_rate > 0.0)) throw InputError("TrainConfig: learn_rate must be > 0");
  if (!(margin > 0.0)) throw InputError("TrainConfig: margin must be > 0");
  if (!(l1_weight >= 0.0)) throw InputError("TrainConfig: l1_weight must be >= 0");
  if (iterations < 0) throw InputError("TrainConfig: iterations must be >= 0");
  if (window < 1) throw InputError("TrainConfig: window must be >= 1");
  if (buffer < 0) throw InputError("TrainConfig: buffer must be >= 0");
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0))
    throw InputError("TrainConfig: validation_fraction must lie in [0, 1)");
}

std::vector<std::string> TrainConfig::warnings() const {
  std::vector<std::string> out;
  if (window == 1)
    out.emplace_back("window = 1: every cloud is a single point; divergences reduce to costs");
  return out;
}

void split_change_points(const std::vector<Index>& usable, double validation_fraction,
                         std::vector<Index>& train, std::vector<Index>& validation) {
  train.clear();
  validation.clear();
  const std::size_t k = usable.size();
  std::size_t n_val = static_cast<std::size_t>(std::lround(validation_fraction * k));
  if (validation_fraction > 0.0 && k >= 2) n_val = std::max<std::size_t>(n_val, 1);
  if (n_val >= k) n_val = k > 0 ? k - 1 : 0;
  train.assign(usable.begin(), usable.end() - static_cast<std::ptrdiff_t>(n_val));
  validation.assign(usable.end() - static_cast<std::ptrdiff_t>(n_val), usable.end());
}

TrainedModel train_metric(const LabeledSequence& seq, const TrainConfig& config,
                          const Matrix* initial_L, const TrainProgress& progress) {
  config.validate();
  seq.validate();

  TrainedModel model;
  model.config = config;
  model.standardizer =
      config.standardize ? Standardizer::fit(seq.data) : Standardizer::identity(seq.dim());
  const Matrix data = model.standardizer.apply(seq.data);

  const TripletSet all = make_triplets(seq, config.window, config.buffer);
  model.skipped_change_points = all.skipped;
  split_change_points(all.change_points, config.validation_fraction, model.train_change_points,
                      model.val_change_points);

  TripletObjective train_obj(data, select_change_points(all, model.train_change_points),
                             config.gamma, config.margin, config.solver);
  TripletObjective val_obj(data, select_change_points(all, model.val_change_points),
                           config.gamma, config.margin, config.solver);

  Matrix L;
  if (initial_L != nullptr) {
    if (initial_L->cols() != seq.dim())
      throw InputError("train_metric: initial L has the wrong number of columns");
    L = *initial_L;
  } else {
    L = init_metric(config.projection_dim, seq.dim(), config.init, config.seed);
  }

  Matrix best_L = L;
  double best_score = std::numeric_limits<double>::infinity();
  model.best_iteration = 0;
  // Histories are per-triplet means whatever the reduction.
  const double train_count = static_cast<double>(train_obj.triplets().triplets.size());
  const double val_count = static_cast<double>(val_obj.triplets().triplets.size());
  for (int t = 0;; ++t) {
    const bool step = t < config.iterations;
    TripletObjective::Evaluation ev;
    double val_loss = 0.0;
    try {
      ev = train_obj.evaluate(L, config.grad_mode, step);
      val_loss = val_obj.empty() ? ev.loss.loss / train_count
                                 : val_obj.evaluate(L, config.grad_mode, false).loss.loss / val_count;
    } catch (const NumericalError& e) {
      throw TrainingError("train_metric: solver failure at iteration " + std::to_string(t) + ": " +
                              e.what(),
                          t - 1);
    } catch (const InputError& e) {
      // data was validated up front, so this is a cost that overflowed
      throw TrainingError("train_metric: solver failure at iteration " + std::to_string(t) + ": " +
                              e.what(),
                          t - 1);
    }
    const double train_loss = ev.loss.loss / train_count;
    if (step && config.loss_reduction == LossReduction::Mean) ev.gradient /= train_count;
    if (!std::isfinite(train_loss) || !std::isfinite(val_loss) ||
        (step && !ev.gradient.allFinite()))
      throw TrainingError("train_metric: non-finite loss at iteration " + std::to_string(t), t - 1);
    model.train_loss_history.push_back(train_loss);
    model.val_loss_history.push_back(val_loss);
    if (progress) progress(t, train_loss, val_loss);
    if (val_loss < best_score) {
      best_score = val_loss;
      best_L = L;
      model.best_iteration = t;
    }
    if (!step) break;
    L = proximal_step(L, ev.gradient, config.learn_rate, config.l1_weight);
    if (!L.allFinite())
      throw TrainingError("train_metric: non-finite L after iteration " + std::to_string(t), t);
  }
  model.metric = GroundMetric{best_L, config.gamma};
  return model;
}

L1Selection select_l1_weight(const LabeledSequence& seq, const TrainConfig& base,
                             const std::vector<double>& grid) {
  if (grid.empty()) throw InputError("select_l1_weight: empty grid");
  L1Selection sel;
  for (double l1 : grid) {
    TrainConfig cfg = base;
    cfg.l1_weight = l1;
    L1Candidate cand;
    cand.l1_weight = l1;
    cand.model = train_metric(seq, cfg);
    if (cand.model.val_change_points.empty())
      throw InputError("select_l1_weight: validation split is empty (raise validation_fraction)");
    const Matrix data = cand.model.standardizer.apply(seq.data);
    const TripletSet val = select_change_points(make_triplets(seq, cfg.window, cfg.buffer),
                                                cand.model.val_change_points);
    const TripletLossResult res =
        triplet_loss(cand.model.metric.L, data, val, cfg.gamma, cfg.margin, cfg.solver);
    const std::size_t n = res.similar_divergence.size();
    std::vector<double> hinge(n);
    for (std::size_t k = 0; k < n; ++k)
      hinge[k] = std::max(0.0, cfg.margin - (res.dissimilar_divergence[k] - res.similar_divergence[k]));
    double mean = 0.0;
    for (double h : hinge) mean += h;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double h : hinge) var += (h - mean) * (h - mean);
    var = n > 1 ? var / static_cast<double>(n - 1) : 0.0;
    cand.val_loss = mean;
    cand.val_se = std::sqrt(var / static_cast<double>(n));
    sel.candidates.push_back(std::move(cand));
  }
  std::size_t best = 0;
  for (std::size_t k = 1; k < sel.candidates.size(); ++k)
    if (sel.candidates[k].val_loss < sel.candidates[best].val_loss) best = k;
  const double bound = sel.candidates[best].val_loss + sel.candidates[best].val_se;
  sel.chosen = best;
  for (std::size_t k = 0; k < sel.candidates.size(); ++k) {
    const auto& c = sel.candidates[k];
    if (c.val_loss <= bound && c.l1_weight > sel.candidates[sel.chosen].l1_weight) sel.chosen = k;
  }
  return sel;
}

}  // namespace sinkcpd

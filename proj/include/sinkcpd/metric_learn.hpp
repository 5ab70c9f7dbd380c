#pragma once

// Supervised ground-metric learning from labeled change points.

#include "sinkcpd/ot.hpp"
#include "sinkcpd/preprocess.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace sinkcpd {

struct LabeledSequence {
  Matrix data;                      // T x d
  std::vector<Index> change_points; // strictly increasing, in [0, T)

  Index length() const { return data.rows(); }
  Index dim() const { return data.cols(); }
  void validate() const;
};

/// Half-open row range [start, start + length).
struct Window {
  Index start = 0;
  Index length = 0;

  Index end() const { return start + length; }
  bool operator==(const Window&) const = default;
  auto operator<=>(const Window&) const = default;
};

struct Triplet {
  Window anchor;
  Window similar;
  Window dissimilar;
  Index change_point = 0;
};

struct TripletSet {
  std::vector<Triplet> triplets;
  std::vector<Index> change_points;  // change points that produced triplets
  std::size_t skipped = 0;           // labeled change points without room for the layout
};

/// Four windows of length w around each change point n (buffer b):
///   P1 = [n-b-2w, n-b-w)  P2 = [n-b-w, n-b)  F1 = [n+b, n+b+w)  F2 = [n+b+w, n+b+2w)
/// giving the triplets (P2,P1,F1), (P1,P2,F2), (F1,F2,P2), (F2,F1,P1).
/// A change point is skipped when the layout leaves [0, T) or when another
/// labeled change point falls strictly inside it.
TripletSet make_triplets(const LabeledSequence& seq, Index window, Index buffer);

/// Keeps the triplets whose generating change point is in `change_points`.
TripletSet select_change_points(const TripletSet& all, const std::vector<Index>& change_points);

struct TripletLossResult {
  double loss = 0.0;
  std::vector<std::size_t> violations;  // triplets with a strictly positive hinge
  std::vector<double> similar_divergence;
  std::vector<double> dissimilar_divergence;
};

/// Evaluates the hinge triplet loss and its L-gradient on one sequence.
/// Windows shared between triplets are solved once; dual potentials from
/// the previous call warm-start the next one, so a single instance should
/// be driven by one thread.
class TripletObjective {
 public:
  TripletObjective(const Matrix& data, TripletSet triplets, double gamma, double margin,
                   SolverConfig solver = {});

  struct Evaluation {
    TripletLossResult loss;
    Matrix gradient;  // empty unless requested
  };

  Evaluation evaluate(const Matrix& L, GradMode mode, bool with_gradient);

  /// Gradient restricted to an explicit violation list, using the plans of
  /// the most recent evaluate() call.
  Matrix gradient_for(const Matrix& L, const std::vector<std::size_t>& violations,
                      GradMode mode) const;

  const TripletSet& triplets() const { return triplets_; }
  bool empty() const { return triplets_.triplets.empty(); }

 private:
  struct PairRef {
    std::size_t first;
    std::size_t second;
  };
  struct TripletRef {
    std::size_t anchor;
    std::size_t similar;
    std::size_t dissimilar;
    std::size_t similar_pair;
    std::size_t dissimilar_pair;
  };

  std::size_t window_id(const Window& w);
  std::size_t pair_id(std::size_t a, std::size_t b);

  const Matrix& data_;
  TripletSet triplets_;
  double gamma_;
  double margin_;
  SolverConfig solver_;

  std::vector<Window> windows_;
  std::vector<Matrix> window_points_;
  std::vector<PairRef> pairs_;
  std::vector<TripletRef> refs_;

  std::vector<SinkhornResult> self_results_;
  std::vector<SinkhornResult> pair_results_;
};

TripletLossResult triplet_loss(const Matrix& L, const Matrix& data, const TripletSet& triplets,
                               double gamma, double margin, const SolverConfig& solver = {});

/// Sum over `violations` of grad S(anchor, similar) - grad S(anchor, dissimilar).
Matrix loss_gradient(const Matrix& L, const Matrix& data, const TripletSet& triplets,
                     const std::vector<std::size_t>& violations, double gamma, GradMode mode,
                     const SolverConfig& solver = {});

enum class InitScheme { Auto, IdentityLike, ScaledGaussian };

/// How per-triplet hinge terms combine into the descended objective.
enum class LossReduction { Mean, Sum };

const char* to_string(LossReduction reduction);
LossReduction loss_reduction_from_string(const std::string& name);

const char* to_string(InitScheme scheme);
InitScheme init_scheme_from_string(const std::string& name);

/// IdentityLike: first r rows of I_d (requires r <= d).
/// ScaledGaussian: iid N(0, 1/d) entries from the counter generator.
/// Auto: IdentityLike when r <= d, else ScaledGaussian.
Matrix init_metric(Index r, Index d, InitScheme scheme, std::uint64_t seed);

/// Entrywise sign(x) * max(|x| - t, 0).
Matrix soft_threshold(const Matrix& x, double t);

/// L - lr * grad, followed by soft-thresholding at lr * l1 when l1 > 0.
Matrix proximal_step(const Matrix& L, const Matrix& grad, double learn_rate, double l1_weight);

struct TrainConfig {
  Index projection_dim = 5;
  double gamma = 0.1;
  double learn_rate = 0.01;
  double margin = 1.0;
  double l1_weight = 0.0;
  int iterations = 2000;
  Index window = 10;
  Index buffer = 0;
  double validation_fraction = 0.2;
  std::uint64_t seed = 0;
  GradMode grad_mode = GradMode::CrossOnly;
  InitScheme init = InitScheme::Auto;
  LossReduction loss_reduction = LossReduction::Mean;
  bool standardize = true;
  SolverConfig solver{};

  void validate() const;
  /// Legal but suspicious settings (e.g. single-sample windows).
  std::vector<std::string> warnings() const;
};

struct TrainedModel {
  GroundMetric metric;
  Standardizer standardizer;
  std::vector<double> train_loss_history;  // entry t: mean triplet loss at L_t
  std::vector<double> val_loss_history;
  int best_iteration = 0;
  TrainConfig config;
  std::vector<Index> train_change_points;
  std::vector<Index> val_change_points;
  std::size_t skipped_change_points = 0;
};

/// Train/validation split at the change-point level: the last
/// round(fraction * K) usable change points (chronologically) validate,
/// at least one always trains.
void split_change_points(const std::vector<Index>& usable, double validation_fraction,
                         std::vector<Index>& train, std::vector<Index>& validation);

using TrainProgress = std::function<void(int iteration, double train_loss, double val_loss)>;

/// Full-batch gradient descent on the triplet hinge loss, averaged or summed
/// per `loss_reduction` (proximal when l1 > 0); both histories hold mean losses.
/// Returns the iterate with the lowest validation loss (training loss when
/// there is no validation split). `initial_L` overrides the init scheme.
TrainedModel train_metric(const LabeledSequence& seq, const TrainConfig& config,
                          const Matrix* initial_L = nullptr,
                          const TrainProgress& progress = {});

struct L1Candidate {
  double l1_weight = 0.0;
  TrainedModel model;
  double val_loss = 0.0;  // mean hinge over validation triplets at the saved L
  double val_se = 0.0;    // standard error of that mean
};

struct L1Selection {
  std::vector<L1Candidate> candidates;  // in grid order
  std::size_t chosen = 0;
};

/// Trains one model per l1 weight and applies the one-standard-error rule:
/// the largest weight whose validation loss is within one standard error of
/// the best. Needs a nonempty validation split.
L1Selection select_l1_weight(const LabeledSequence& seq, const TrainConfig& base,
                             const std::vector<double>& grid);

}  // namespace sinkcpd

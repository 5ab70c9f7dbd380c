#pragma once

// Entropic optimal transport with a parameterized Mahalanobis ground cost.
//
// Conventions used throughout:
//   C_ij  = || L (x_i - y_j) ||^2
//   E(P)  = sum_ij P_ij (log P_ij - 1)
//   W(X,Y) = min_P <C, P> + gamma * E(P)   over couplings of (a, b)
//   S(X,Y) = W(X,Y) - W(X,X)/2 - W(Y,Y)/2
// The optimal plan factorizes as P_ij = exp((f_i + g_j - C_ij) / gamma).

#include <Eigen/Dense>

#include <cstdint>
#include <string>

namespace sinkcpd {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

struct PointCloud {
  Matrix points;   // n x d, one sample per row
  Vector weights;  // n, on the probability simplex

  static PointCloud uniform(Matrix points);

  Index size() const { return points.rows(); }
  Index dim() const { return points.cols(); }

  /// Throws InputError when a PointCloud invariant does not hold.
  void validate() const;
};

struct GroundMetric {
  Matrix L;  // r x d
  double gamma = 1.0;

  static GroundMetric identity(Index d, double gamma);

  Index projection_dim() const { return L.rows(); }
  Index dim() const { return L.cols(); }

  void validate() const;

  /// Matrix R with ||R v|| == ||L v|| for every v, with min(r, d) rows.
  /// Equals L when r <= d; otherwise the triangular factor of a QR of L.
  Matrix effective_projection() const;
};

struct TransportPlan {
  Matrix plan;
  Vector row_marginal;  // target a
  Vector col_marginal;  // target b

  /// max(|P 1 - a|_inf, |P^T 1 - b|_inf)
  double marginal_residual() const;
};

struct DualPotentials {
  Vector f;
  Vector g;
};

struct SinkhornResult {
  double value = 0.0;           // <C,P> + gamma * E(P)
  double transport_cost = 0.0;  // <C,P>
  TransportPlan plan;
  DualPotentials potentials;
  int iterations = 0;
  bool converged = false;
};

struct SolverConfig {
  double tol = 1e-6;  // L-infinity marginal residual
  int max_iter = 1000;
};

/// Rows of `points` mapped through `projection` (n x d times d x k^T).
/// The accumulation order is fixed so identical rows project identically
/// regardless of the surrounding matrix.
Matrix project_rows(const Matrix& points, const Matrix& projection);

/// Pairwise squared Euclidean distances between the rows of Z and W.
Matrix pairwise_sq_dist(const Matrix& Z, const Matrix& W);

Matrix cost_matrix(const PointCloud& X, const PointCloud& Y, const GroundMetric& metric);

/// E(P) = sum P (log P - 1), with 0 log 0 = 0.
double plan_neg_entropy(const Matrix& P);

/// Log-stabilized Sinkhorn iterations. `warm_start`, when given, seeds the
/// dual potentials; the fixed point does not depend on it.
SinkhornResult sinkhorn_solve(const Matrix& C, const Vector& a, const Vector& b, double gamma,
                              const SolverConfig& config = {},
                              const DualPotentials* warm_start = nullptr);

SinkhornResult sinkhorn_distance(const PointCloud& X, const PointCloud& Y,
                                 const GroundMetric& metric, const SolverConfig& config = {});

/// The three regularized OT problems behind one divergence value.
struct DivergenceTerms {
  SinkhornResult cross;  // W(X, Y)
  SinkhornResult self_x; // W(X, X)
  SinkhornResult self_y; // W(Y, Y)
  double value = 0.0;
};

DivergenceTerms sinkhorn_divergence_terms(const PointCloud& X, const PointCloud& Y,
                                          const GroundMetric& metric,
                                          const SolverConfig& config = {});

double sinkhorn_divergence(const PointCloud& X, const PointCloud& Y, const GroundMetric& metric,
                           const SolverConfig& config = {});

/// sum_ij P_ij (x_i - y_j)(x_i - y_j)^T, a d x d matrix.
Matrix plan_second_moment(const Matrix& X, const Matrix& Y, const Matrix& plan);

/// 2 L sum_ij P_ij (x_i - y_j)(x_i - y_j)^T: the gradient of W(X, Y) in L
/// with the optimal plan held fixed.
Matrix grad_sinkhorn_wrt_L(const PointCloud& X, const PointCloud& Y, const TransportPlan& plan,
                           const Matrix& L);

enum class GradMode {
  CrossOnly,     // gradient of W(X, Y) alone
  FullDebiased,  // gradient of W(X,Y) - W(X,X)/2 - W(Y,Y)/2
};

const char* to_string(GradMode mode);
GradMode grad_mode_from_string(const std::string& name);

Matrix grad_divergence_wrt_L(const PointCloud& X, const PointCloud& Y,
                             const GroundMetric& metric, const SolverConfig& config,
                             GradMode mode = GradMode::CrossOnly);

}  // namespace sinkcpd

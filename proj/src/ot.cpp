#include "sinkcpd/ot.hpp"

#include "sinkcpd/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace sinkcpd {

namespace {

constexpr double kSimplexTol = 1e-9;
// Scalings are folded back into the potentials once they leave this range.
constexpr double kAbsorbBound = 1e50;
constexpr double kAnnealFactor = 0.25;
constexpr double kStageTol = 1e-3;
// Scaling is judged stalled when a check window fails to halve the residual.
constexpr int kStallWindow = 50;
constexpr int kNewtonMaxBacktracks = 40;

bool all_finite(const Matrix& m) { return m.allFinite(); }

void check_weights(const Vector& w, const char* what) {
  if (w.size() == 0) throw InputError(std::string(what) + ": empty weight vector");
  if (!w.allFinite()) throw InputError(std::string(what) + ": non-finite weight");
  if ((w.array() <= 0.0).any())
    throw InputError(std::string(what) + ": weights must be strictly positive");
  if (std::abs(w.sum() - 1.0) > kSimplexTol)
    throw InputError(std::string(what) + ": weights do not sum to 1");
}

double log_sum_exp_shifted(const double* values, Index n, Index stride) {
  double hi = -std::numeric_limits<double>::infinity();
  for (Index k = 0; k < n; ++k) hi = std::max(hi, values[k * stride]);
  if (!std::isfinite(hi)) return hi;
  double s = 0.0;
  for (Index k = 0; k < n; ++k) s += std::exp(values[k * stride] - hi);
  return hi + std::log(s);
}

double dual_objective(const Matrix& C, const Vector& a, const Vector& b, double gamma,
                      const Vector& f, const Vector& g) {
  double mass = 0.0;
  for (Index j = 0; j < C.cols(); ++j)
    for (Index i = 0; i < C.rows(); ++i) mass += std::exp((f(i) + g(j) - C(i, j)) / gamma);
  return f.dot(a) + g.dot(b) - gamma * mass;
}

double plan_from_duals(const Matrix& C, double gamma, const Vector& f, const Vector& g,
                       const Vector& a, const Vector& b, Matrix& P, Vector& grad) {
  const Index n = C.rows();
  const Index m = C.cols();
  for (Index j = 0; j < m; ++j)
    for (Index i = 0; i < n; ++i) P(i, j) = std::exp((f(i) + g(j) - C(i, j)) / gamma);
  grad.head(n) = a - P.rowwise().sum();
  grad.tail(m) = b - P.colwise().sum().transpose();
  return grad.cwiseAbs().maxCoeff();
}

// Damped Newton ascent on the concave dual, used once scaling stalls. The
// last column potential is pinned to remove the constant shift.
int newton_polish(const Matrix& C, const Vector& a, const Vector& b, double gamma, double tol,
                  int budget, Vector& f, Vector& g) {
  const Index n = C.rows();
  const Index m = C.cols();
  const Index k = n + m - 1;
  Matrix P(n, m);
  Vector grad(n + m);
  Matrix H(k, k);
  int steps = 0;
  double residual = plan_from_duals(C, gamma, f, g, a, b, P, grad);
  while (residual > tol && steps < budget) {
    ++steps;
    H.setZero();
    H.topLeftCorner(n, n).diagonal() = P.rowwise().sum();
    H.topRightCorner(n, m - 1) = P.leftCols(m - 1);
    H.bottomLeftCorner(m - 1, n) = P.leftCols(m - 1).transpose();
    H.bottomRightCorner(m - 1, m - 1).diagonal() = P.leftCols(m - 1).colwise().sum().transpose();
    H /= gamma;
    H.diagonal().array() += 1e-14 * H.diagonal().maxCoeff();
    const Vector rhs = grad.head(k);
    const Vector step = H.ldlt().solve(rhs);
    if (!step.allFinite()) break;

    const double base = dual_objective(C, a, b, gamma, f, g);
    const double slope = rhs.dot(step);
    double t = 1.0;
    bool accepted = false;
    Vector f_try(n), g_try(m);
    for (int bt = 0; bt < kNewtonMaxBacktracks; ++bt, t *= 0.5) {
      f_try = f + t * step.head(n);
      g_try = g;
      g_try.head(m - 1) += t * step.tail(m - 1);
      const double value = dual_objective(C, a, b, gamma, f_try, g_try);
      if (std::isfinite(value) && value >= base + 1e-4 * t * slope) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      // Rounding can hide progress in the objective; fall back to the residual.
      f_try = f + step.head(n);
      g_try = g;
      g_try.head(m - 1) += step.tail(m - 1);
      Vector grad_try(n + m);
      Matrix P_try(n, m);
      const double r_try = plan_from_duals(C, gamma, f_try, g_try, a, b, P_try, grad_try);
      if (!(r_try < residual)) break;
    }
    f = f_try;
    g = g_try;
    residual = plan_from_duals(C, gamma, f, g, a, b, P, grad);
  }
  return steps;
}

}  // namespace

PointCloud PointCloud::uniform(Matrix points) {
  PointCloud cloud;
  const Index n = points.rows();
  cloud.points = std::move(points);
  cloud.weights = Vector::Constant(n, n > 0 ? 1.0 / static_cast<double>(n) : 0.0);
  return cloud;
}

void PointCloud::validate() const {
  if (points.rows() < 1 || points.cols() < 1) throw InputError("PointCloud: empty point set");
  if (weights.size() != points.rows()) throw InputError("PointCloud: weight count != point count");
  if (!all_finite(points)) throw InputError("PointCloud: non-finite coordinate");
  check_weights(weights, "PointCloud");
}

GroundMetric GroundMetric::identity(Index d, double gamma) {
  return GroundMetric{Matrix::Identity(d, d), gamma};
}

void GroundMetric::validate() const {
  if (L.rows() < 1 || L.cols() < 1) throw InputError("GroundMetric: L must be at least 1 x 1");
  if (!all_finite(L)) throw InputError("GroundMetric: non-finite entry in L");
  if (!(gamma > 0.0) || !std::isfinite(gamma))
    throw InputError("GroundMetric: gamma must be positive and finite");
}

Matrix GroundMetric::effective_projection() const {
  if (L.rows() <= L.cols()) return L;
  Eigen::HouseholderQR<Matrix> qr(L);
  Matrix R = qr.matrixQR().topRows(L.cols()).triangularView<Eigen::Upper>();
  return R;
}

double TransportPlan::marginal_residual() const {
  const double rows = (plan.rowwise().sum() - row_marginal).cwiseAbs().maxCoeff();
  const double cols = (plan.colwise().sum().transpose() - col_marginal).cwiseAbs().maxCoeff();
  return std::max(rows, cols);
}

Matrix project_rows(const Matrix& points, const Matrix& projection) {
  if (points.cols() != projection.cols())
    throw InputError("project_rows: point dimension " + std::to_string(points.cols()) +
                     " != projection input dimension " + std::to_string(projection.cols()));
  const Index n = points.rows();
  const Index k = projection.rows();
  const Index d = points.cols();
  Matrix out = Matrix::Zero(n, k);
  for (Index c = 0; c < k; ++c) {
    for (Index j = 0; j < d; ++j) {
      const double w = projection(c, j);
      if (w == 0.0) continue;
      for (Index i = 0; i < n; ++i) out(i, c) += w * points(i, j);
    }
  }
  return out;
}

Matrix pairwise_sq_dist(const Matrix& Z, const Matrix& W) {
  if (Z.cols() != W.cols()) throw InputError("pairwise_sq_dist: dimension mismatch");
  const Index n = Z.rows();
  const Index m = W.rows();
  Matrix C = Matrix::Zero(n, m);
  for (Index k = 0; k < Z.cols(); ++k) {
    for (Index j = 0; j < m; ++j) {
      const double wj = W(j, k);
      for (Index i = 0; i < n; ++i) {
        const double diff = Z(i, k) - wj;
        C(i, j) += diff * diff;
      }
    }
  }
  return C;
}

Matrix cost_matrix(const PointCloud& X, const PointCloud& Y, const GroundMetric& metric) {
  metric.validate();
  if (X.dim() != metric.dim() || Y.dim() != metric.dim())
    throw InputError("cost_matrix: dimension mismatch (X d=" + std::to_string(X.dim()) +
                     ", Y d=" + std::to_string(Y.dim()) +
                     ", metric d=" + std::to_string(metric.dim()) + ")");
  const Matrix R = metric.effective_projection();
  return pairwise_sq_dist(project_rows(X.points, R), project_rows(Y.points, R));
}

double plan_neg_entropy(const Matrix& P) {
  double e = 0.0;
  for (Index j = 0; j < P.cols(); ++j)
    for (Index i = 0; i < P.rows(); ++i) {
      const double p = P(i, j);
      if (p > 0.0) e += p * (std::log(p) - 1.0);
    }
  return e;
}

SinkhornResult sinkhorn_solve(const Matrix& C, const Vector& a, const Vector& b, double gamma,
                              const SolverConfig& config, const DualPotentials* warm_start) {
  const Index n = C.rows();
  const Index m = C.cols();
  if (n < 1 || m < 1) throw InputError("sinkhorn_solve: empty cost matrix");
  if (a.size() != n || b.size() != m) throw InputError("sinkhorn_solve: marginal size mismatch");
  if (!all_finite(C)) throw InputError("sinkhorn_solve: non-finite cost");
  if ((C.array() < 0.0).any()) throw InputError("sinkhorn_solve: negative cost");
  check_weights(a, "sinkhorn_solve(a)");
  check_weights(b, "sinkhorn_solve(b)");
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw InputError("sinkhorn_solve: gamma must be > 0");
  if (!(config.tol > 0.0)) throw InputError("sinkhorn_solve: tol must be > 0");
  if (config.max_iter <= 0) throw InputError("sinkhorn_solve: max_iter must be >= 1");

  Vector f = Vector::Zero(n);
  Vector g = Vector::Zero(m);
  bool warm = false;
  if (warm_start != nullptr && warm_start->f.size() == n && warm_start->g.size() == m &&
      warm_start->f.allFinite() && warm_start->g.allFinite()) {
    f = warm_start->f;
    g = warm_start->g;
    warm = true;
  }

  const Vector log_a = a.array().log();
  const Vector log_b = b.array().log();

  // Cold starts anneal gamma down from the cost scale; small gamma from
  // zero potentials otherwise crawls.
  std::vector<double> schedule;
  if (!warm) {
    for (double gs = C.maxCoeff() * kAnnealFactor; gs > gamma; gs *= kAnnealFactor)
      schedule.push_back(gs);
  }
  schedule.push_back(gamma);

  Matrix K(n, m);
  Vector u = Vector::Ones(n);
  Vector v = Vector::Ones(m);
  Vector kv(n);
  Vector ktu(m);
  Vector scratch_col(n);
  Vector scratch_row(m);
  double stage_gamma = gamma;
  double inv_gamma = 1.0 / gamma;

  auto rebuild_kernel = [&] {
    for (Index j = 0; j < m; ++j)
      for (Index i = 0; i < n; ++i) K(i, j) = std::exp((f(i) + g(j) - C(i, j)) * inv_gamma);
    u.setOnes();
    v.setOnes();
  };
  auto absorb = [&] {
    f.array() += stage_gamma * u.array().log();
    g.array() += stage_gamma * v.array().log();
    u.setOnes();
    v.setOnes();
  };
  // One exact log-domain iteration; rows of the rebuilt kernel then sum to a.
  auto log_domain_step = [&] {
    for (Index j = 0; j < m; ++j) {
      for (Index i = 0; i < n; ++i) scratch_col(i) = (f(i) - C(i, j)) * inv_gamma;
      g(j) = stage_gamma * (log_b(j) - log_sum_exp_shifted(scratch_col.data(), n, 1));
    }
    for (Index i = 0; i < n; ++i) {
      for (Index j = 0; j < m; ++j) scratch_row(j) = (g(j) - C(i, j)) * inv_gamma;
      f(i) = stage_gamma * (log_a(i) - log_sum_exp_shifted(scratch_row.data(), m, 1));
    }
    if (!f.allFinite() || !g.allFinite())
      throw NumericalError("sinkhorn_solve: non-finite dual potentials");
    rebuild_kernel();
  };
  auto usable = [](const Vector& s) {
    for (Index k = 0; k < s.size(); ++k) {
      const double x = s(k);
      if (!(x > 1.0 / kAbsorbBound) || !(x < kAbsorbBound)) return false;
    }
    return true;
  };

  int iterations = 0;
  for (std::size_t stage = 0; stage < schedule.size(); ++stage) {
    const bool last = stage + 1 == schedule.size();
    stage_gamma = schedule[stage];
    inv_gamma = 1.0 / stage_gamma;
    const double stage_tol = last ? config.tol : std::max(config.tol, kStageTol);
    if (warm && stage == 0)
      log_domain_step();
    else
      rebuild_kernel();
    int since_check = 0;
    bool recovered = false;
    double checkpoint = std::numeric_limits<double>::infinity();
    bool stalled = false;
    for (;;) {
      kv.noalias() = K * v;
      Vector u_next = a.cwiseQuotient(kv);
      if (!usable(u_next)) {
        absorb();
        log_domain_step();
        kv.noalias() = K * v;
        u_next = a.cwiseQuotient(kv);
      }
      u = u_next;

      // Rows now match a; the column residual decides convergence.
      ktu.noalias() = K.transpose() * u;
      const double residual = (v.cwiseProduct(ktu) - b).cwiseAbs().maxCoeff();
      if (!std::isfinite(residual)) {
        if (recovered) throw NumericalError("sinkhorn_solve: non-finite marginal residual");
        recovered = true;
        u.setOnes();
        v.setOnes();
        log_domain_step();
        continue;
      }
      if (residual <= stage_tol || iterations >= config.max_iter) break;
      if (++since_check == kStallWindow) {
        since_check = 0;
        if (residual > 0.5 * checkpoint) {
          stalled = true;
          break;
        }
        checkpoint = residual;
      }

      ++iterations;
      Vector v_next = b.cwiseQuotient(ktu);
      if (!usable(v_next)) {
        absorb();
        log_domain_step();
        continue;
      }
      v = v_next;
    }
    absorb();
    if (stalled && last && n > 1 && m > 1)
      iterations += newton_polish(C, a, b, gamma, config.tol, config.max_iter - iterations, f, g);
    absorb();
    if (iterations >= config.max_iter) break;
  }
  inv_gamma = 1.0 / gamma;

  if (!f.allFinite() || !g.allFinite())
    throw NumericalError("sinkhorn_solve: non-finite dual potentials");

  SinkhornResult result;
  result.iterations = iterations;
  Matrix& P = result.plan.plan;
  P.resize(n, m);
  double cost = 0.0;
  double neg_entropy = 0.0;
  for (Index j = 0; j < m; ++j) {
    for (Index i = 0; i < n; ++i) {
      const double log_p = (f(i) + g(j) - C(i, j)) * inv_gamma;
      const double p = std::exp(log_p);
      P(i, j) = p;
      cost += p * C(i, j);
      if (p > 0.0) neg_entropy += p * (log_p - 1.0);
    }
  }
  if (!std::isfinite(cost) || !std::isfinite(neg_entropy))
    throw NumericalError("sinkhorn_solve: non-finite objective");

  result.plan.row_marginal = a;
  result.plan.col_marginal = b;
  result.transport_cost = cost;
  result.value = cost + gamma * neg_entropy;
  result.potentials = DualPotentials{std::move(f), std::move(g)};
  result.converged = result.plan.marginal_residual() <= config.tol;
  return result;
}

SinkhornResult sinkhorn_distance(const PointCloud& X, const PointCloud& Y,
                                 const GroundMetric& metric, const SolverConfig& config) {
  X.validate();
  Y.validate();
  return sinkhorn_solve(cost_matrix(X, Y, metric), X.weights, Y.weights, metric.gamma, config);
}

DivergenceTerms sinkhorn_divergence_terms(const PointCloud& X, const PointCloud& Y,
                                          const GroundMetric& metric,
                                          const SolverConfig& config) {
  X.validate();
  Y.validate();
  metric.validate();
  if (X.dim() != metric.dim() || Y.dim() != metric.dim())
    throw InputError("sinkhorn_divergence: dimension mismatch");
  const Matrix R = metric.effective_projection();
  const Matrix zx = project_rows(X.points, R);
  const Matrix zy = project_rows(Y.points, R);
  DivergenceTerms t;
  t.cross = sinkhorn_solve(pairwise_sq_dist(zx, zy), X.weights, Y.weights, metric.gamma, config);
  t.self_x = sinkhorn_solve(pairwise_sq_dist(zx, zx), X.weights, X.weights, metric.gamma, config);
  t.self_y = sinkhorn_solve(pairwise_sq_dist(zy, zy), Y.weights, Y.weights, metric.gamma, config);
  t.value = t.cross.value - 0.5 * t.self_x.value - 0.5 * t.self_y.value;
  return t;
}

double sinkhorn_divergence(const PointCloud& X, const PointCloud& Y, const GroundMetric& metric,
                           const SolverConfig& config) {
  return sinkhorn_divergence_terms(X, Y, metric, config).value;
}

Matrix plan_second_moment(const Matrix& X, const Matrix& Y, const Matrix& plan) {
  if (plan.rows() != X.rows() || plan.cols() != Y.rows() || X.cols() != Y.cols())
    throw InputError("plan_second_moment: shape mismatch");
  const Vector row_mass = plan.rowwise().sum();
  const Vector col_mass = plan.colwise().sum().transpose();
  const Matrix cross = X.transpose() * (plan * Y);
  Matrix G = X.transpose() * row_mass.asDiagonal() * X;
  G.noalias() += Y.transpose() * col_mass.asDiagonal() * Y;
  G -= cross;
  G -= cross.transpose();
  return G;
}

Matrix grad_sinkhorn_wrt_L(const PointCloud& X, const PointCloud& Y, const TransportPlan& plan,
                           const Matrix& L) {
  if (X.dim() != L.cols() || Y.dim() != L.cols())
    throw InputError("grad_sinkhorn_wrt_L: L has " + std::to_string(L.cols()) +
                     " columns but clouds have dimension " + std::to_string(X.dim()));
  if (plan.plan.rows() != X.size() || plan.plan.cols() != Y.size())
    throw InputError("grad_sinkhorn_wrt_L: plan shape does not match the clouds");
  return 2.0 * L * plan_second_moment(X.points, Y.points, plan.plan);
}

const char* to_string(GradMode mode) {
  switch (mode) {
    case GradMode::CrossOnly: return "paper_cross_only";
    case GradMode::FullDebiased: return "full_debiased";
  }
  return "?";
}

GradMode grad_mode_from_string(const std::string& name) {
  if (name == "paper_cross_only" || name == "cross") return GradMode::CrossOnly;
  if (name == "full_debiased" || name == "full") return GradMode::FullDebiased;
  throw InputError("unknown gradient mode '" + name + "'");
}

Matrix grad_divergence_wrt_L(const PointCloud& X, const PointCloud& Y,
                             const GroundMetric& metric, const SolverConfig& config,
                             GradMode mode) {
  if (mode == GradMode::CrossOnly) {
    const SinkhornResult cross = sinkhorn_distance(X, Y, metric, config);
    return grad_sinkhorn_wrt_L(X, Y, cross.plan, metric.L);
  }
  const DivergenceTerms t = sinkhorn_divergence_terms(X, Y, metric, config);
  Matrix G = plan_second_moment(X.points, Y.points, t.cross.plan.plan);
  G -= 0.5 * plan_second_moment(X.points, X.points, t.self_x.plan.plan);
  G -= 0.5 * plan_second_moment(Y.points, Y.points, t.self_y.plan.plan);
  return 2.0 * metric.L * G;
}

}  // namespace sinkcpd

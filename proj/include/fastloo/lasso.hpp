#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include "model.hpp"

namespace fastloo {

struct SolverReport {
  int iterations = 0;
  double kkt_residual = 0.0;
  bool converged = false;
};

/// (h - lambda*sgn(h)) / gamma when |h| > lambda, else 0.
inline double soft_threshold(double h, double lambda, double gamma) {
  if (std::abs(h) <= lambda) return 0.0;
  return (h > 0.0 ? h - lambda : h + lambda) / gamma;
}

struct Rss {
  double E = 0.0;    // (1/2)||y - A x||^2
  double eps = 0.0;  // E / M
};

inline Rss rss(const ProblemInstance& inst, const VectorXd& x) {
  if (x.size() != inst.N()) throw InputError("rss: estimate length differs from N");
  Rss r;
  r.E = 0.5 * (inst.y() - inst.A() * x).squaredNorm();
  r.eps = r.E / static_cast<double>(inst.M());
  return r;
}

inline double lasso_objective(const ProblemInstance& inst, const VectorXd& x, double lambda) {
  return rss(inst, x).E + lambda * x.lpNorm<1>();
}

/// Largest violation of the LASSO subgradient conditions at x: with
/// g = A^T (y - A x), |g_i - lambda sgn(x_i)| on nonzero coordinates and
/// max(0, |g_i| - lambda) on zero coordinates.
inline double kkt_residual(const ProblemInstance& inst, const VectorXd& x, double lambda) {
  const VectorXd g = inst.A().transpose() * (inst.y() - inst.A() * x);
  double worst = 0.0;
  for (Index i = 0; i < x.size(); ++i) {
    const double v = x(i) != 0.0 ? std::abs(g(i) - (x(i) > 0.0 ? lambda : -lambda))
                                 : std::max(0.0, std::abs(g(i)) - lambda);
    worst = std::max(worst, v);
  }
  return worst;
}

/// Tolerance the coordinate-descent solver certifies against.
inline double kkt_tolerance(const ProblemInstance& inst, const RunConfig& cfg) {
  return cfg.solver_tol * (1.0 + inst.y().norm());
}

/// ||A^T y||_inf: smallest penalty with an all-zero solution.
inline double lambda_max(const ProblemInstance& inst) {
  return (inst.A().transpose() * inst.y()).lpNorm<Eigen::Infinity>();
}

inline std::vector<Index> extract_active_set(const VectorXd& x, double threshold) {
  std::vector<Index> active;
  for (Index i = 0; i < x.size(); ++i)
    if (std::abs(x(i)) >= threshold) active.push_back(i);
  return active;
}

inline LassoSolution make_solution(const ProblemInstance& inst, double lambda, VectorXd x,
                                   double threshold) {
  LassoSolution sol;
  sol.lambda = lambda;
  sol.active_set = extract_active_set(x, threshold);
  sol.rho = static_cast<double>(sol.active_set.size()) / static_cast<double>(inst.N());
  sol.x1 = std::move(x);
  return sol;
}

namespace detail {

/// One cyclic pass of exact coordinate minimization over `coords`, keeping the
/// residual r = y - A x current. Returns max_j |dx_j| * ||A_j||.
template <class Coords>
double cd_sweep(const MatrixXd& A, const VectorXd& colsq, double lambda, const Coords& coords,
                VectorXd& x, VectorXd& r) {
  double max_move = 0.0;
  for (Index j : coords) {
    const double c = colsq(j);
    if (c <= 0.0) {
      x(j) = 0.0;
      continue;
    }
    const double old = x(j);
    const double z = A.col(j).dot(r) + c * old;
    const double nw = soft_threshold(z, lambda, c);
    if (nw != old) {
      r.noalias() -= (nw - old) * A.col(j);
      x(j) = nw;
      max_move = std::max(max_move, std::abs(nw - old) * std::sqrt(c));
    }
  }
  return max_move;
}

/// Moves the nonzeros of x toward the minimizer of the objective restricted
/// to their current sign pattern, stopping where a coordinate first reaches
/// zero. When the penalty term has a component along the null space of the
/// active columns the move follows that component instead. Returns true if the
/// objective decreased.
inline bool orthant_step(const ProblemInstance& inst, double lambda, const std::vector<Index>& nz, VectorXd& x) {
  if (nz.empty()) return false;
  const MatrixXd As = inst.A()(Eigen::all, nz);
  const VectorXd xs = x(nz);
  const VectorXd s = xs.array().sign().matrix();
  Eigen::BDCSVD<MatrixXd> svd(As, Eigen::ComputeThinU | Eigen::ComputeFullV);
  const VectorXd& sv = svd.singularValues();
  const double cut = std::max(As.rows(), As.cols()) * std::numeric_limits<double>::epsilon() *
                     (sv.size() ? sv(0) : 0.0);
  Index rank = 0;
  while (rank < sv.size() && sv(rank) > cut) ++rank;
  const auto Vr = svd.matrixV().leftCols(rank);
  const auto Vn = svd.matrixV().rightCols(As.cols() - rank);

  VectorXd d;
  bool unbounded = false;
  const VectorXd s_null = Vn * (Vn.transpose() * s);
  if (s_null.norm() > 1e-8 * std::sqrt(static_cast<double>(s.size()))) {
    d = -s_null;
    unbounded = true;
  } else {
    const VectorXd sr = sv.head(rank);
    const VectorXd uy = svd.matrixU().leftCols(rank).transpose() * inst.y();
    const VectorXd vs = lambda * (Vr.transpose() * s);
    const VectorXd z = Vr * ((uy.array() / sr.array() - vs.array() / sr.array().square()).matrix()) +
                       Vn * (Vn.transpose() * xs);
    d = z - xs;
  }
  double t = unbounded ? std::numeric_limits<double>::infinity() : 1.0;
  Index hit = -1;
  for (Index j = 0; j < d.size(); ++j) {
    if (s(j) * d(j) < 0.0) {
      const double tj = -xs(j) / d(j);
      if (tj < t) {
        t = tj;
        hit = j;
      }
    }
  }
  if (!std::isfinite(t) || !(t > 0.0)) return false;
  VectorXd cand = x;
  cand(nz) = xs + t * d;
  if (hit >= 0) cand(nz[static_cast<std::size_t>(hit)]) = 0.0;
  if (!(lasso_objective(inst, cand, lambda) < lasso_objective(inst, x, lambda))) return false;
  x = std::move(cand);
  return true;
}

}  // namespace detail

/// Cyclic coordinate descent for (1/2)||y - A x||^2 + lambda ||x||_1.
/// Restricted sweeps between two full sweeps.
inline constexpr int kInnerSweeps = 100;

/// Alternates full sweeps with sweeps restricted to the current nonzeros and
/// stops once the KKT residual is within kkt_tolerance(). Each round that
/// misses the tolerance ends with detail::orthant_step. One sweep (full or
/// restricted) counts as one iteration. On hitting max_iter the current
/// iterate is returned with converged = false; the objective is monotone so
/// it is also the best one seen.
inline std::pair<LassoSolution, SolverReport> solve_lasso(const ProblemInstance& inst, double lambda,
                                                          const std::optional<VectorXd>& warm,
                                                          const RunConfig& cfg) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw InputError("lambda must be finite and >= 0");
  const MatrixXd& A = inst.A();
  const Index N = inst.N();
  VectorXd x = VectorXd::Zero(N);
  if (warm) {
    if (warm->size() != N) throw InputError("warm start has wrong length");
    x = *warm;
  }
  const VectorXd colsq = A.colwise().squaredNorm().transpose();
  const double tol = kkt_tolerance(inst, cfg);
  const double max_col = std::sqrt(colsq.maxCoeff());
  VectorXd r = inst.y() - A * x;

  std::vector<Index> all(static_cast<std::size_t>(N));
  for (Index j = 0; j < N; ++j) all[static_cast<std::size_t>(j)] = j;

  SolverReport report;
  std::vector<Index> nz;
  while (report.iterations < cfg.max_iter) {
    detail::cd_sweep(A, colsq, lambda, all, x, r);
    ++report.iterations;

    nz.clear();
    for (Index j = 0; j < N; ++j)
      if (x(j) != 0.0) nz.push_back(j);
    for (int inner = 0; inner < kInnerSweeps && !nz.empty() && report.iterations < cfg.max_iter; ++inner) {
      const double move = detail::cd_sweep(A, colsq, lambda, nz, x, r);
      ++report.iterations;
      if (move * max_col < 0.1 * tol) break;
    }

    r = inst.y() - A * x;  // drop accumulated rounding
    report.kkt_residual = kkt_residual(inst, x, lambda);
    if (report.kkt_residual <= tol) {
      report.converged = true;
      break;
    }
    nz.clear();
    for (Index j = 0; j < N; ++j)
      if (x(j) != 0.0) nz.push_back(j);
    if (detail::orthant_step(inst, lambda, nz, x)) r = inst.y() - A * x;
  }
  if (report.iterations == 0) report.kkt_residual = kkt_residual(inst, x, lambda);
  return {make_solution(inst, lambda, std::move(x), cfg.active_threshold), report};
}

inline std::pair<LassoSolution, SolverReport> solve_lasso(const ProblemInstance& inst, double lambda,
                                                          const RunConfig& cfg) {
  return solve_lasso(inst, lambda, std::nullopt, cfg);
}

/// Fills sol.x2 with the least-squares fit restricted to the active columns
/// (minimum-norm when those columns are linearly dependent, in which case
/// sol.rank_deficient is set).
inline LassoSolution debias(const ProblemInstance& inst, LassoSolution sol) {
  VectorXd x2 = VectorXd::Zero(inst.N());
  sol.rank_deficient = false;
  if (!sol.active_set.empty()) {
    const MatrixXd At = inst.A()(Eigen::all, sol.active_set);
    Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(At);
    const VectorXd xt = cod.solve(inst.y());
    sol.rank_deficient = cod.rank() < At.cols();
    x2(sol.active_set) = xt;
  }
  sol.x2 = std::move(x2);
  return sol;
}

struct PathResult {
  std::vector<LassoSolution> solutions;
  std::vector<SolverReport> reports;

  bool all_converged() const {
    return std::all_of(reports.begin(), reports.end(),
                       [](const SolverReport& r) { return r.converged; });
  }
};

/// Warm-started sweep over cfg.lambda_grid (strictly descending).
inline PathResult solve_path(const ProblemInstance& inst, const RunConfig& cfg) {
  cfg.validate();
  PathResult out;
  out.solutions.reserve(cfg.lambda_grid.size());
  out.reports.reserve(cfg.lambda_grid.size());
  std::optional<VectorXd> warm;
  for (double lambda : cfg.lambda_grid) {
    auto [sol, rep] = solve_lasso(inst, lambda, warm, cfg);
    warm = sol.x1;
    out.solutions.push_back(std::move(sol));
    out.reports.push_back(rep);
  }
  return out;
}

}  // namespace fastloo

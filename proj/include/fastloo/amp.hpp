#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "lasso.hpp"
#include "model.hpp"

namespace fastloo {

/// Iterate of the message-passing solver. At a type-1 fixed point
/// a = y - A x, h = A^T a + gamma x and x_i = soft_threshold(h_i, lambda, gamma).
struct AmpState {
  VectorXd x;
  VectorXd a;
  VectorXd h;
  double gamma = 0.0;
  int iter = 0;
};

struct AmpResult {
  LassoSolution solution;
  AmpState state;
  SolverReport report;
};

struct AmpDebiasResult {
  VectorXd x2;
  AmpState state;
  SolverReport report;
};

namespace detail {

inline double amp_guard(const ProblemInstance& inst) {
  return 1e6 * (1.0 + inst.y().lpNorm<Eigen::Infinity>());
}

// One run from zero at damping d; false on divergence or an exhausted budget.
template <class Propose>
bool amp_attempt(const ProblemInstance& inst, const RunConfig& cfg, double d, Propose& propose, AmpState& st,
                 int& iterations) {
  const MatrixXd& A = inst.A();
  const double alpha = inst.alpha();
  const double N = static_cast<double>(inst.N());
  const double guard = amp_guard(inst);

  st.x = VectorXd::Zero(inst.N());
  st.a = inst.y();
  st.gamma = alpha;
  st.h = A.transpose() * st.a;
  double active = 0.0;

  VectorXd proposal(inst.N());
  for (st.iter = 0; st.iter < cfg.max_iter;) {
    const double v = active / (N * st.gamma);
    VectorXd a = (inst.y() - A * st.x + v * st.a) / (1.0 + v);
    const double gamma_target = alpha / (1.0 + v);
    VectorXd h = A.transpose() * a + st.gamma * st.x;
    active = static_cast<double>(propose(h, st.gamma, proposal));
    VectorXd x = d * proposal + (1.0 - d) * st.x;
    const double gamma = d * gamma_target + (1.0 - d) * st.gamma;
    ++st.iter;
    ++iterations;

    if (!x.allFinite() || !a.allFinite() || x.lpNorm<Eigen::Infinity>() > guard) return false;
    const double change = (proposal - st.x).lpNorm<Eigen::Infinity>();
    st.a = std::move(a);
    st.h = std::move(h);
    st.gamma = gamma;
    if (change <= cfg.solver_tol) {
      st.x = proposal;
      return true;
    }
    st.x = std::move(x);
  }
  return false;
}

/// Times the damping is halved after the divergence guard trips.
inline constexpr int kAmpDampingEscalations = 3;

// Shared loop for both estimators. `propose` maps (h, gamma) to the undamped
// estimate and returns the number of coordinates it treats as active.
//
// Cavity residual with Onsager memory, scalar closure:
//   v     = (active count) / (N gamma)
//   a     = (y - A x + v a_prev) / (1 + v)
//   gamma = alpha / (1 + v)
//   h     = A^T a + gamma x
// whose fixed points satisfy a = y - A x and gamma = alpha - rho.
// A diverging run is restarted from zero with half the damping.
template <class Propose>
void amp_iterate(const ProblemInstance& inst, const RunConfig& cfg, Propose&& propose, AmpState& st,
                 SolverReport& report) {
  report = SolverReport{};
  double d = cfg.damping;
  for (int attempt = 0; attempt <= kAmpDampingEscalations; ++attempt, d *= 0.5) {
    AmpState trial;
    const bool ok = amp_attempt(inst, cfg, d, propose, trial, report.iterations);
    const bool diverged = !ok && trial.iter < cfg.max_iter;
    if (!diverged || attempt == 0) st = trial;
    if (ok) {
      report.converged = true;
      return;
    }
    if (!diverged) return;  // iteration budget spent without divergence
  }
}

}  // namespace detail

/// Message-passing solver for the LASSO estimate. Agrees with solve_lasso at
/// convergence; intended for i.i.d.-like designs with alpha < 1.
inline AmpResult amp_solve_x1(const ProblemInstance& inst, double lambda, const RunConfig& cfg) {
  if (!(lambda > 0.0)) throw InputError("amp_solve_x1 needs lambda > 0");
  AmpResult out;
  auto propose = [lambda](const VectorXd& h, double gamma, VectorXd& x) {
    Index count = 0;
    for (Index i = 0; i < h.size(); ++i) {
      x(i) = soft_threshold(h(i), lambda, gamma);
      if (x(i) != 0.0) ++count;
    }
    return count;
  };
  detail::amp_iterate(inst, cfg, propose, out.state, out.report);
  out.report.kkt_residual = kkt_residual(inst, out.state.x, lambda);
  out.solution = make_solution(inst, lambda, out.state.x, cfg.active_threshold);
  return out;
}

/// Message-passing solver for the debiased estimate on the support of `base`.
inline AmpDebiasResult amp_solve_x2(const ProblemInstance& inst, const LassoSolution& base,
                                    const RunConfig& cfg) {
  AmpDebiasResult out;
  if (base.active_set.empty()) {
    out.x2 = VectorXd::Zero(inst.N());
    out.state.x = out.x2;
    out.state.a = inst.y();
    out.state.h = inst.A().transpose() * inst.y();
    out.state.gamma = inst.alpha();
    out.report.converged = true;
    return out;
  }
  std::vector<char> support(static_cast<std::size_t>(inst.N()), 0);
  for (Index i : base.active_set) support[static_cast<std::size_t>(i)] = 1;
  const Index count = static_cast<Index>(base.active_set.size());
  auto propose = [&support, count](const VectorXd& h, double gamma, VectorXd& x) {
    for (Index i = 0; i < h.size(); ++i) x(i) = support[static_cast<std::size_t>(i)] ? h(i) / gamma : 0.0;
    return count;
  };
  detail::amp_iterate(inst, cfg, propose, out.state, out.report);
  out.x2 = out.state.x;
  // Normal-equation residual on the support plays the role of the KKT residual.
  const VectorXd g = inst.A()(Eigen::all, base.active_set).transpose() * (inst.y() - inst.A() * out.x2);
  out.report.kkt_residual = g.lpNorm<Eigen::Infinity>();
  return out;
}

}  // namespace fastloo

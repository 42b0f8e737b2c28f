#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include <boost/math/tools/minima.hpp>

#include "metrics.hpp"
#include "model.hpp"
#include "special_functions.hpp"

namespace fastloo {

/// Random-design ensemble at zero temperature, N -> infinity with alpha = M/N fixed.
struct ReplicaEnsemble {
  double alpha = 0.5;
  double rho_hat = 0.1;
  double sigma_x2 = 1.0;
  double sigma_xi2 = 0.001;

  void validate() const {
    if (!(alpha > 0.0 && alpha < 1.0)) throw InputError("replica analysis requires 0 < alpha < 1");
    if (!(rho_hat >= 0.0 && rho_hat <= 1.0)) throw InputError("rho_hat must lie in [0, 1]");
    if (!(sigma_x2 > 0.0)) throw InputError("sigma_x2 must be positive");
    if (!(sigma_xi2 >= 0.0)) throw InputError("sigma_xi2 must be non-negative");
  }
};

struct ReplicaParams : ReplicaEnsemble {
  double lambda = 1.0;

  ReplicaParams() = default;
  ReplicaParams(const ReplicaEnsemble& e, double lam) : ReplicaEnsemble(e), lambda(lam) {}

  void validate() const {
    ReplicaEnsemble::validate();
    if (!(lambda > 0.0) || !std::isfinite(lambda)) throw InputError("lambda must be positive");
  }
};

struct EosOptions {
  /// Relative change of every order parameter per (undamped) step.
  double tol = 1e-13;
  /// Bound on |d chi| (1 + chi) per step, the residual of chi = rho / (alpha - rho).
  double susceptibility_tol = 1e-10;
  int max_iter = 200000;
  double damping = 0.5;
  /// Number of times the damping is halved before giving up.
  int escalations = 2;
};

/// Order parameters of the LASSO estimator and the derived observables.
struct ReplicaState1 {
  double chi1 = 0.0, Q1 = 0.0, m1 = 0.0;
  double chi1_hat = 0.0, Q1_hat = 0.0, m1_hat = 0.0;
  double theta_A = 0.0, theta_I = 0.0;
  double scale_A = 0.0, scale_I = 0.0;  // lambda^2 / theta^2
  double rho = 0.0, TP = 0.0, FP = 0.0;
  double M1_tilde = 0.0;  // MSE + sigma_xi^2
  double eps1 = 0.0;      // RSS rate
  int iterations = 0;

  double mse1(const ReplicaEnsemble& p) const { return M1_tilde - p.sigma_xi2; }
};

/// Order parameters of the debiased estimator (conditioned on a ReplicaState1).
struct ReplicaState2 {
  double chi2 = 0.0, Q2 = 0.0, m2 = 0.0;
  double chi2_hat = 0.0, Q2_hat = 0.0, m2_hat = 0.0;
  double chi_c = 0.0, Q_c = 0.0, chi_c_hat = 0.0, Q_c_hat = 0.0;
  double M2_tilde = 0.0, Mc_tilde = 0.0;
  double eps2 = 0.0;
  int iterations = 0;

  double mse2(const ReplicaEnsemble& p) const { return M2_tilde - p.sigma_xi2; }
};

template <class State>
class EosNonConvergence : public std::runtime_error {
 public:
  EosNonConvergence(const char* what, State last) : std::runtime_error(what), last_state(std::move(last)) {}
  State last_state;
};

namespace detail {

inline double rel_change(double nw, double old) { return std::abs(nw - old) / (1.0 + std::abs(old)); }

inline double chi_residual(double nw, double old) { return std::abs(nw - old) * (1.0 + std::abs(old)); }

/// Conjugates and observables implied by (chi1, Q1, m1).
inline ReplicaState1 complete_state1(const ReplicaParams& p, double chi, double Q, double m) {
  ReplicaState1 s;
  s.chi1 = chi;
  s.Q1 = Q;
  s.m1 = m;
  s.M1_tilde = p.rho_hat * p.sigma_x2 - 2.0 * m + Q + p.sigma_xi2;
  s.chi1_hat = p.alpha * s.M1_tilde / ((1.0 + chi) * (1.0 + chi));
  s.Q1_hat = p.alpha / (1.0 + chi);
  s.m1_hat = s.Q1_hat;
  s.scale_A = s.chi1_hat + s.m1_hat * s.m1_hat * p.sigma_x2;
  s.scale_I = s.chi1_hat;
  s.theta_A = p.lambda / std::sqrt(s.scale_A);
  s.theta_I = p.lambda / std::sqrt(s.scale_I);
  s.TP = 2.0 * gauss_tail_moment(0, s.theta_A);
  s.FP = 2.0 * gauss_tail_moment(0, s.theta_I);
  s.rho = p.rho_hat * s.TP + (1.0 - p.rho_hat) * s.FP;
  s.eps1 = s.chi1_hat / (2.0 * p.alpha);
  return s;
}

struct Step1 {
  double chi, Q, m;
};

inline Step1 eos1_map(const ReplicaParams& p, const ReplicaState1& s) {
  Step1 n;
  n.chi = s.rho / s.Q1_hat;
  n.Q = 2.0 / (s.Q1_hat * s.Q1_hat) *
        (p.rho_hat * F_scaled(s.theta_A, s.scale_A) + (1.0 - p.rho_hat) * F_scaled(s.theta_I, s.scale_I));
  n.m = 2.0 * (s.m1_hat / s.Q1_hat) * p.rho_hat * p.sigma_x2 * gauss_tail_moment(0, s.theta_A);
  return n;
}

struct Vars2 {
  double chi2, Q2, m2, chi_c, Q_c;
};

inline ReplicaState2 complete_state2(const ReplicaParams& p, const ReplicaState1& s1, const Vars2& v) {
  ReplicaState2 s;
  s.chi2 = v.chi2;
  s.Q2 = v.Q2;
  s.m2 = v.m2;
  s.chi_c = v.chi_c;
  s.Q_c = v.Q_c;
  const double a = p.alpha;
  const double c1 = 1.0 + s1.chi1;
  const double c2 = 1.0 + v.chi2;
  s.M2_tilde = p.rho_hat * p.sigma_x2 - 2.0 * v.m2 + v.Q2 + p.sigma_xi2;
  s.Mc_tilde = p.rho_hat * p.sigma_x2 - (s1.m1 + v.m2) + v.Q_c + p.sigma_xi2;
  const double r = v.chi_c / c1;
  s.chi2_hat = a / (c2 * c2) * (r * r * s1.M1_tilde - 2.0 * r * s.Mc_tilde + s.M2_tilde);
  s.Q2_hat = a / c2;
  s.m2_hat = a / c2 * (1.0 - r);
  s.chi_c_hat = a / (c1 * c2) * (s.Mc_tilde - r * s1.M1_tilde);
  s.Q_c_hat = a / c2 * r;
  s.eps2 = s.chi2_hat / (2.0 * a);
  return s;
}

inline Vars2 eos2_map(const ReplicaParams& p, const ReplicaState1& s1, const ReplicaState2& s) {
  const double GA = G_scaled(s1.theta_A, s1.scale_A);
  const double GI = G_scaled(s1.theta_I, s1.scale_I);
  const double rh = p.rho_hat;
  const double sx = p.sigma_x2;
  const double drive_A = s.chi_c_hat + s1.m1_hat * s.m2_hat * sx;
  Vars2 n;
  n.chi2 = s1.rho / s.Q2_hat;
  n.Q2 = (s1.rho * s.chi2_hat + s.m2_hat * s.m2_hat * s1.m1 +
          2.0 * s.Q_c_hat * (s.chi_c_hat * s1.chi1 + s.m2_hat * s1.m1) + s.Q_c_hat * s.Q_c_hat * s1.Q1 +
          2.0 * (rh * drive_A * drive_A * GA + (1.0 - rh) * s.chi_c_hat * s.chi_c_hat * GI)) /
         (s.Q2_hat * s.Q2_hat);
  // Only truly nonzero components contribute to the overlap, hence rho_hat * sigma_x^2.
  n.m2 = (s1.m1 * (s.m2_hat + s.Q_c_hat) + 2.0 * s1.m1_hat * rh * sx * drive_A * GA) / s.Q2_hat;
  n.chi_c = (s.Q_c_hat * s1.chi1 + 2.0 * (rh * drive_A * GA + (1.0 - rh) * s.chi_c_hat * GI)) / s.Q2_hat;
  n.Q_c = (s.chi_c_hat * s1.chi1 + s.m2_hat * s1.m1 + s.Q_c_hat * s1.Q1) / s.Q2_hat;
  return n;
}

template <class Vars, class Complete, class Map, class Distance, class Blend>
auto damped_fixed_point(Vars start, const EosOptions& opt, Complete complete, Map map, Distance dist,
                        Blend blend, const char* what) {
  using State = decltype(complete(start));
  double damping = opt.damping;
  State last = complete(start);
  int total = 0;
  for (int attempt = 0; attempt <= opt.escalations; ++attempt, damping *= 0.5) {
    Vars v = start;
    for (int it = 0; it < opt.max_iter; ++it) {
      State s = complete(v);
      const Vars nw = map(s);
      ++total;
      const double d = dist(nw, v);
      if (!std::isfinite(d)) break;
      last = s;
      if (d < 1.0) {
        s.iterations = total;
        return s;
      }
      v = blend(nw, v, damping);
    }
  }
  last.iterations = total;
  throw EosNonConvergence<State>(what, last);
}

}  // namespace detail

/// Solves the LASSO equations of state by damped fixed-point iteration.
/// `warm` (chi1, Q1, m1) defaults to chi1 = 1, Q1 = m1 = rho_hat sigma_x^2.
/// Throws EosNonConvergence<ReplicaState1> after the damping escalations fail.
inline ReplicaState1 solve_eos1(const ReplicaParams& p, const EosOptions& opt = {},
                                const std::optional<ReplicaState1>& warm = std::nullopt) {
  p.validate();
  detail::Step1 start{1.0, p.rho_hat * p.sigma_x2, p.rho_hat * p.sigma_x2};
  if (p.rho_hat == 0.0) start = {1.0, 1e-3, 0.0};
  if (warm) start = {warm->chi1, warm->Q1, warm->m1};
  return detail::damped_fixed_point(
      start, opt, [&](const detail::Step1& v) { return detail::complete_state1(p, v.chi, v.Q, v.m); },
      [&](const ReplicaState1& s) { return detail::eos1_map(p, s); },
      [&](const detail::Step1& a, const detail::Step1& b) {
        const double rel = std::max({detail::rel_change(a.chi, b.chi), detail::rel_change(a.Q, b.Q),
                                     detail::rel_change(a.m, b.m)});
        return std::max(rel / opt.tol, detail::chi_residual(a.chi, b.chi) / opt.susceptibility_tol);
      },
      [](const detail::Step1& a, const detail::Step1& b, double d) {
        return detail::Step1{d * a.chi + (1 - d) * b.chi, d * a.Q + (1 - d) * b.Q, d * a.m + (1 - d) * b.m};
      },
      "LASSO equations of state did not converge");
}

/// Solves the debiased-estimator equations of state with s1 frozen.
inline ReplicaState2 solve_eos2(const ReplicaParams& p, const ReplicaState1& s1, const EosOptions& opt = {},
                                const std::optional<ReplicaState2>& warm = std::nullopt) {
  p.validate();
  detail::Vars2 start{s1.chi1, s1.Q1, s1.m1, 0.0, s1.Q1};
  if (warm) start = {warm->chi2, warm->Q2, warm->m2, warm->chi_c, warm->Q_c};
  using detail::rel_change;
  return detail::damped_fixed_point(
      start, opt, [&](const detail::Vars2& v) { return detail::complete_state2(p, s1, v); },
      [&](const ReplicaState2& s) { return detail::eos2_map(p, s1, s); },
      [&](const detail::Vars2& a, const detail::Vars2& b) {
        const double rel = std::max({rel_change(a.chi2, b.chi2), rel_change(a.Q2, b.Q2), rel_change(a.m2, b.m2),
                                     rel_change(a.chi_c, b.chi_c), rel_change(a.Q_c, b.Q_c)});
        return std::max(rel / opt.tol, detail::chi_residual(a.chi2, b.chi2) / opt.susceptibility_tol);
      },
      [](const detail::Vars2& a, const detail::Vars2& b, double d) {
        auto mix = [d](double x, double y) { return d * x + (1 - d) * y; };
        return detail::Vars2{mix(a.chi2, b.chi2), mix(a.Q2, b.Q2), mix(a.m2, b.m2), mix(a.chi_c, b.chi_c),
                             mix(a.Q_c, b.Q_c)};
      },
      "debiased-estimator equations of state did not converge");
}

struct AnalyticLooe {
  double looe1 = 0.0;            // (1/2) M1_tilde
  double looe2_correct = 0.0;    // (1/2) M2_tilde
  double looe2_incorrect = 0.0;  // large-system single-fit formula applied to the debiased fit
};

inline AnalyticLooe analytic_looe(const ReplicaParams&, const ReplicaState1& s1, const ReplicaState2& s2) {
  AnalyticLooe out;
  const double r = s2.chi_c / (1.0 + s1.chi1);
  out.looe1 = 0.5 * s1.M1_tilde;
  out.looe2_correct = 0.5 * s2.M2_tilde;
  out.looe2_incorrect = 0.5 * (r * r * s1.M1_tilde - 2.0 * r * s2.Mc_tilde + s2.M2_tilde);
  return out;
}

/// Spread of the LASSO fixed point over a few starting points; a large value
/// signals coexisting solutions.
inline double eos1_multistart_spread(const ReplicaParams& p, const EosOptions& opt = {}) {
  const double base = p.rho_hat * p.sigma_x2 + p.sigma_xi2;
  const double starts[][3] = {{0.1, 0.1 * base, 0.0}, {1.0, base, 0.5 * base}, {10.0, 2.0 * base, base}};
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& s : starts) {
    ReplicaState1 w;
    w.chi1 = s[0];
    w.Q1 = s[1];
    w.m1 = s[2];
    const auto st = solve_eos1(p, opt, w);
    lo = std::min(lo, st.rho);
    hi = std::max(hi, st.rho);
  }
  return hi - lo;
}

struct ReplicaPathPoint {
  double lambda = 0.0;
  bool converged = false;
  double rho = 0.0, TP = 0.0, FP = 0.0;
  double eps1 = 0.0, eps2 = 0.0;
  double looe1 = 0.0, looe2_correct = 0.0, looe2_incorrect = 0.0;
  double mse1 = 0.0, mse2 = 0.0;
  double youden = 0.0;
  ReplicaState1 s1;
  ReplicaState2 s2;
};

struct MarkedPoint {
  double lambda = 0.0;
  double fp = 0.0;
  double tp = 0.0;
  double rho = 0.0;
  double value = 0.0;
  bool refined = false;  // false when the extremum sits on the grid boundary
};

struct ReplicaSweep {
  std::vector<ReplicaPathPoint> points;
  std::optional<MarkedPoint> min_looe1;
  std::optional<MarkedPoint> min_looe2;
  std::optional<MarkedPoint> max_youden;
};

/// Solves both equation sets at one penalty, optionally warm-started.
inline ReplicaPathPoint evaluate_replica_point(const ReplicaEnsemble& ens, double lambda, const EosOptions& opt,
                                               const ReplicaPathPoint* warm = nullptr) {
  const ReplicaParams p(ens, lambda);
  ReplicaPathPoint pt;
  pt.lambda = lambda;
  std::optional<ReplicaState1> w1;
  std::optional<ReplicaState2> w2;
  if (warm && warm->converged) {
    w1 = warm->s1;
    w2 = warm->s2;
  }
  try {
    pt.s1 = solve_eos1(p, opt, w1);
    pt.s2 = solve_eos2(p, pt.s1, opt, w2);
  } catch (const EosNonConvergence<ReplicaState1>&) {
    return pt;
  } catch (const EosNonConvergence<ReplicaState2>&) {
    return pt;
  }
  const auto lo = analytic_looe(p, pt.s1, pt.s2);
  pt.converged = true;
  pt.rho = pt.s1.rho;
  pt.TP = pt.s1.TP;
  pt.FP = pt.s1.FP;
  pt.eps1 = pt.s1.eps1;
  pt.eps2 = pt.s2.eps2;
  pt.looe1 = lo.looe1;
  pt.looe2_correct = lo.looe2_correct;
  pt.looe2_incorrect = lo.looe2_incorrect;
  pt.mse1 = pt.s1.mse1(ens);
  pt.mse2 = pt.s2.mse2(ens);
  pt.youden = youden(pt.TP, pt.FP);
  return pt;
}

namespace detail {

// Locates the extremum of `key` over converged grid points and refines it by
// Brent's method in log(lambda) between the neighbouring grid points.
template <class Key>
std::optional<MarkedPoint> locate_extremum(const ReplicaEnsemble& ens, const std::vector<ReplicaPathPoint>& pts,
                                           const EosOptions& opt, Key key, bool refine) {
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (!pts[i].converged) continue;
    if (!best || key(pts[i]) < key(pts[*best])) best = i;
  }
  if (!best) return std::nullopt;
  const std::size_t i = *best;
  const auto mark = [&](const ReplicaPathPoint& pt, bool refined) {
    return MarkedPoint{pt.lambda, pt.FP, pt.TP, pt.rho, key(pt), refined};
  };
  const bool interior = i > 0 && i + 1 < pts.size() && pts[i - 1].converged && pts[i + 1].converged;
  if (!refine || !interior) return mark(pts[i], false);

  const ReplicaPathPoint& seed = pts[i];
  auto objective = [&](double log_lambda) {
    const auto pt = evaluate_replica_point(ens, std::exp(log_lambda), opt, &seed);
    return pt.converged ? key(pt) : std::numeric_limits<double>::infinity();
  };
  std::uintmax_t max_eval = 200;
  const auto [log_lambda, value] = boost::math::tools::brent_find_minima(
      objective, std::log(pts[i + 1].lambda), std::log(pts[i - 1].lambda), 40, max_eval);
  (void)value;
  const auto pt = evaluate_replica_point(ens, std::exp(log_lambda), opt, &seed);
  if (!pt.converged || key(pt) > key(seed)) return mark(seed, false);
  return mark(pt, true);
}

}  // namespace detail

/// Analytic curves over a descending grid, each point warm-started from the
/// previous one, plus the minimizers of both LOO errors and the Youden
/// maximizer. Non-converged points are kept (converged = false) but ignored
/// when locating extrema.
inline ReplicaSweep sweep_lambda(const ReplicaEnsemble& ens, const std::vector<double>& grid,
                                 const EosOptions& opt = {}, bool refine = true) {
  ens.validate();
  RunConfig probe;
  probe.lambda_grid = grid;
  probe.validate();
  ReplicaSweep out;
  out.points.reserve(grid.size());
  const ReplicaPathPoint* prev = nullptr;
  for (double lambda : grid) {
    out.points.push_back(evaluate_replica_point(ens, lambda, opt, prev));
    prev = out.points.back().converged ? &out.points.back() : prev;
  }
  if (out.points.size() < 2) return out;
  out.min_looe1 = detail::locate_extremum(
      ens, out.points, opt, [](const ReplicaPathPoint& p) { return p.looe1; }, refine);
  out.min_looe2 = detail::locate_extremum(
      ens, out.points, opt, [](const ReplicaPathPoint& p) { return p.looe2_correct; }, refine);
  if (ens.rho_hat > 0.0 && ens.rho_hat < 1.0) {
    out.max_youden = detail::locate_extremum(
        ens, out.points, opt, [](const ReplicaPathPoint& p) { return -p.youden; }, refine);
    if (out.max_youden) out.max_youden->value = -out.max_youden->value;
  }
  return out;
}

}  // namespace fastloo

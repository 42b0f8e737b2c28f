#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "lasso.hpp"
#include "model.hpp"

namespace fastloo {

enum class LooMethod { Approx1, Approx2, Naive, KFold };

inline const char* to_string(LooMethod m) {
  switch (m) {
    case LooMethod::Approx1: return "approx1";
    case LooMethod::Approx2: return "approx2";
    case LooMethod::Naive: return "naive";
    case LooMethod::KFold: return "kfold";
  }
  return "?";
}

/// Leave-one-out error estimate at one penalty value. Excluded observations
/// carry NaN in per_mu_terms and are listed in `excluded`; looe and std_error
/// are taken over the remaining terms.
struct LooEstimate {
  double lambda = 0.0;
  double looe = 0.0;
  VectorXd per_mu_terms;
  double std_error = 0.0;
  LooMethod method = LooMethod::Approx1;
  Estimator estimator = Estimator::Type1;
  bool unstable = false;
  /// Set for every single-fit estimate of the type-2 error: the perturbative
  /// formula is known to be biased for the debiased estimator and is kept only
  /// for comparison against brute force.
  bool invalid_approximation = false;
  std::vector<Index> excluded;
};

/// Fills looe (mean) and std_error (sample std / sqrt(count)) from the finite
/// entries of per_mu_terms.
inline void summarize_terms(LooEstimate& est) {
  double sum = 0.0;
  Index n = 0;
  for (Index mu = 0; mu < est.per_mu_terms.size(); ++mu) {
    if (std::isfinite(est.per_mu_terms(mu))) {
      sum += est.per_mu_terms(mu);
      ++n;
    }
  }
  if (n == 0) {
    est.looe = std::numeric_limits<double>::quiet_NaN();
    est.std_error = std::numeric_limits<double>::quiet_NaN();
    return;
  }
  const double mean = sum / static_cast<double>(n);
  double ss = 0.0;
  for (Index mu = 0; mu < est.per_mu_terms.size(); ++mu) {
    if (std::isfinite(est.per_mu_terms(mu))) {
      const double d = est.per_mu_terms(mu) - mean;
      ss += d * d;
    }
  }
  est.looe = mean;
  est.std_error = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) / std::sqrt(static_cast<double>(n)) : 0.0;
}

inline const VectorXd& estimate_for(const LassoSolution& sol, Estimator e) {
  if (e == Estimator::Type1) return sol.x1;
  if (!sol.x2) throw std::logic_error("type-2 estimate requested but solution is not debiased");
  return *sol.x2;
}

/// Inverse Gram matrix of the active columns, shared by every cavity update
/// at one penalty value.
class ActiveGram {
 public:
  ActiveGram(const ProblemInstance& inst, const LassoSolution& sol)
      : At_(inst.A()(Eigen::all, sol.active_set)) {
    const Index k = At_.cols();
    gram_ = At_.transpose() * At_;
    if (k == 0) {
      inverse_.resize(0, 0);
      return;
    }
    Eigen::FullPivLU<MatrixXd> lu(gram_);
    invertible_ = lu.isInvertible();
    if (invertible_) {
      Eigen::LDLT<MatrixXd> ldlt(gram_);
      inverse_ = ldlt.solve(MatrixXd::Identity(k, k));
    } else {
      Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(gram_);
      inverse_ = cod.pseudoInverse();
    }
  }

  Index size() const { return At_.cols(); }
  bool invertible() const { return invertible_; }
  const MatrixXd& active_columns() const { return At_; }
  const MatrixXd& gram() const { return gram_; }
  const MatrixXd& inverse() const { return inverse_; }

 private:
  MatrixXd At_;
  MatrixXd gram_;
  MatrixXd inverse_;
  bool invertible_ = true;
};

/// Rank-one downdate threshold: below this |1 - u^T G^{-1} u| the closed form
/// is abandoned for a direct inverse.
inline constexpr double kShermanMorrisonFloor = 1e-10;

/// Direct inverse of A~^T A~ with row mu removed; nullopt when singular.
inline std::optional<MatrixXd> downdated_inverse_direct(const ActiveGram& g, Index mu) {
  const Index k = g.size();
  const VectorXd u = g.active_columns().row(mu).transpose();
  const MatrixXd D = g.gram() - u * u.transpose();
  Eigen::FullPivLU<MatrixXd> lu(D);
  if (!lu.isInvertible()) return std::nullopt;
  return MatrixXd(lu.solve(MatrixXd::Identity(k, k)));
}

/// Cavity susceptibility on the active set with observation mu removed,
/// (A~_{\mu}^T A~_{\mu})^{-1}, obtained from the shared inverse by a
/// Sherman-Morrison downdate; falls back to direct inversion when the
/// downdate denominator vanishes. Throws std::runtime_error if the downdated
/// matrix is singular.
inline MatrixXd susceptibility_cavity(const ActiveGram& g, Index mu) {
  if (g.size() == 0) return MatrixXd(0, 0);
  const VectorXd u = g.active_columns().row(mu).transpose();
  const VectorXd v = g.inverse() * u;
  const double denom = 1.0 - u.dot(v);
  if (std::abs(denom) < kShermanMorrisonFloor) {
    auto direct = downdated_inverse_direct(g, mu);
    if (!direct) throw std::runtime_error("cavity Gram matrix is singular");
    return *direct;
  }
  return g.inverse() + (v * v.transpose()) / denom;
}

inline MatrixXd susceptibility_cavity(const ProblemInstance& inst, const LassoSolution& sol, Index mu) {
  if (mu < 0 || mu >= inst.M()) throw InputError("observation index out of range");
  return susceptibility_cavity(ActiveGram(inst, sol), mu);
}

/// Single-fit LOO estimate with the exact cavity susceptibility:
///   term_mu = (1/2) (1 + u_mu^T chi^{\mu} u_mu)^2 (y_mu - A_mu x)^2.
/// With h = u^T (A~^T A~)^{-1} u the quadratic form reduces to h / (1 - h),
/// so one shared inverse serves every mu.
inline LooEstimate looe_approx1(const ProblemInstance& inst, const LassoSolution& sol,
                                Estimator estimator) {
  LassoSolution work = sol;
  if (estimator == Estimator::Type2 && !work.x2) work = debias(inst, std::move(work));
  const VectorXd resid = inst.y() - inst.A() * estimate_for(work, estimator);

  LooEstimate est;
  est.lambda = sol.lambda;
  est.method = LooMethod::Approx1;
  est.estimator = estimator;
  est.invalid_approximation = estimator == Estimator::Type2;
  est.per_mu_terms.resize(inst.M());

  const ActiveGram g(inst, work);
  if (g.size() == 0) {
    est.per_mu_terms = 0.5 * resid.array().square();
    summarize_terms(est);
    return est;
  }
  est.unstable = !g.invertible();
  const MatrixXd V = g.active_columns() * g.inverse();  // row mu: u_mu^T G^{-1}
  for (Index mu = 0; mu < inst.M(); ++mu) {
    const double h = V.row(mu).dot(g.active_columns().row(mu));
    double quad;
    if (std::abs(1.0 - h) >= kShermanMorrisonFloor) {
      quad = h / (1.0 - h);
    } else {
      auto direct = downdated_inverse_direct(g, mu);
      if (!direct) {
        est.per_mu_terms(mu) = std::numeric_limits<double>::quiet_NaN();
        est.excluded.push_back(mu);
        est.unstable = true;
        continue;
      }
      const VectorXd u = g.active_columns().row(mu).transpose();
      quad = u.dot(*direct * u);
    }
    const double pre = 1.0 + quad;
    est.per_mu_terms(mu) = 0.5 * pre * pre * resid(mu) * resid(mu);
  }
  summarize_terms(est);
  return est;
}

/// Large-system prefactor (alpha / (alpha - rho))^2 = (M / (M - |active|))^2.
inline double large_n_prefactor(Index M, Index active) {
  if (active >= M) throw std::domain_error("prefactor singular at rho = alpha");
  const double r = static_cast<double>(M) / static_cast<double>(M - active);
  return r * r;
}

/// Single-fit LOO estimate with the random-design susceptibility
/// chi = rho / (alpha - rho): every residual is inflated by alpha / (alpha - rho).
inline LooEstimate looe_approx2(const ProblemInstance& inst, const LassoSolution& sol,
                                Estimator estimator) {
  LassoSolution work = sol;
  if (estimator == Estimator::Type2 && !work.x2) work = debias(inst, std::move(work));
  const double pre = large_n_prefactor(inst.M(), work.df());
  const VectorXd resid = inst.y() - inst.A() * estimate_for(work, estimator);

  LooEstimate est;
  est.lambda = sol.lambda;
  est.method = LooMethod::Approx2;
  est.estimator = estimator;
  est.invalid_approximation = estimator == Estimator::Type2;
  est.per_mu_terms = 0.5 * pre * resid.array().square();
  summarize_terms(est);
  return est;
}

/// First-order expansion of the large-system formula in rho/alpha:
/// ||r||^2 + 2 (rho/alpha) ||r||^2, approximating 2 M eps_LOO. In the
/// small-rho regime the correction tends to 2 N rho sigma_xi^2, the AIC penalty.
inline double aic_expansion(const ProblemInstance& inst, const LassoSolution& sol,
                            Estimator estimator = Estimator::Type1) {
  LassoSolution work = sol;
  if (estimator == Estimator::Type2 && !work.x2) work = debias(inst, std::move(work));
  const double r2 = (inst.y() - inst.A() * estimate_for(work, estimator)).squaredNorm();
  const double ratio = static_cast<double>(work.df()) / static_cast<double>(inst.M());  // rho / alpha
  return r2 + 2.0 * ratio * r2;
}

}  // namespace fastloo

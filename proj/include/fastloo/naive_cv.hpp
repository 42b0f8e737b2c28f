#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include "datagen.hpp"
#include "fast_loo.hpp"
#include "lasso.hpp"
#include "model.hpp"
#include "parallel.hpp"

namespace fastloo {

/// Brute-force leave-one-out over cfg.lambda_grid. Every fold refits the
/// LASSO on M-1 rows, warm-started from the full-data solution at the same
/// penalty; for Type2 the fold's own active set is then refit by least
/// squares. Folds that fail to converge are excluded and flag the estimate.
inline std::vector<LooEstimate> naive_loo_path(const ProblemInstance& inst, Estimator estimator,
                                               const RunConfig& cfg) {
  cfg.validate();
  if (inst.M() < 2) throw InputError("leave-one-out needs M >= 2");
  const PathResult full = solve_path(inst, cfg);
  const std::size_t L = cfg.lambda_grid.size();
  const Index M = inst.M();

  // terms(l, mu), failed(l, mu)
  MatrixXd terms(static_cast<Index>(L), M);
  std::vector<std::vector<char>> failed(L, std::vector<char>(static_cast<std::size_t>(M), 0));

  parallel_for(static_cast<std::size_t>(M), resolve_workers(cfg.workers), [&](std::size_t m) {
    const Index mu = static_cast<Index>(m);
    const ProblemInstance fold = inst.without_row(mu);
    for (std::size_t l = 0; l < L; ++l) {
      auto [sol, rep] = solve_lasso(fold, cfg.lambda_grid[l], full.solutions[l].x1, cfg);
      if (!rep.converged) {
        failed[l][m] = 1;
        terms(static_cast<Index>(l), mu) = std::numeric_limits<double>::quiet_NaN();
        continue;
      }
      const VectorXd* x = &sol.x1;
      if (estimator == Estimator::Type2) {
        sol = debias(fold, std::move(sol));
        x = &*sol.x2;
      }
      const double r = inst.y()(mu) - inst.A().row(mu).dot(*x);
      terms(static_cast<Index>(l), mu) = 0.5 * r * r;
    }
  });

  std::vector<LooEstimate> out(L);
  for (std::size_t l = 0; l < L; ++l) {
    LooEstimate& est = out[l];
    est.lambda = cfg.lambda_grid[l];
    est.method = LooMethod::Naive;
    est.estimator = estimator;
    est.per_mu_terms = terms.row(static_cast<Index>(l)).transpose();
    for (Index mu = 0; mu < M; ++mu) {
      if (failed[l][static_cast<std::size_t>(mu)]) {
        est.excluded.push_back(mu);
        est.unstable = true;
      }
    }
    summarize_terms(est);
  }
  return out;
}

inline LooEstimate naive_loo(const ProblemInstance& inst, double lambda, Estimator estimator,
                             RunConfig cfg) {
  cfg.lambda_grid = {lambda};
  return naive_loo_path(inst, estimator, cfg).front();
}

/// Random partition of [0, M) into k folds whose sizes differ by at most one.
inline std::vector<std::vector<Index>> make_folds(Index M, int k, std::uint64_t seed) {
  if (k < 2 || k > M) throw InputError("k-fold CV needs 2 <= k <= M");
  std::vector<Index> perm(static_cast<std::size_t>(M));
  std::iota(perm.begin(), perm.end(), Index{0});
  std::mt19937_64 rng(derive_seed(seed, 0));
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<std::vector<Index>> folds(static_cast<std::size_t>(k));
  for (std::size_t p = 0; p < perm.size(); ++p) folds[p % static_cast<std::size_t>(k)].push_back(perm[p]);
  for (auto& f : folds) std::sort(f.begin(), f.end());
  return folds;
}

inline constexpr int kDefaultResamples = 200;

/// k-fold CV over `lambda_grid`. Per-observation held-out errors are stored
/// in original row order; the error bar is the standard deviation of the mean
/// over `resamples` multinomial (bootstrap) resamplings of those terms.
inline std::vector<LooEstimate> kfold_cv(const ProblemInstance& inst, const std::vector<double>& lambda_grid,
                                         int k, Estimator estimator, std::uint64_t seed, RunConfig cfg,
                                         int resamples = kDefaultResamples) {
  cfg.lambda_grid = lambda_grid;
  cfg.validate();
  const auto folds = make_folds(inst.M(), k, seed);
  const std::size_t L = lambda_grid.size();
  const Index M = inst.M();
  MatrixXd terms(static_cast<Index>(L), M);
  std::vector<std::vector<char>> fold_failed(folds.size(), std::vector<char>(L, 0));

  parallel_for(folds.size(), resolve_workers(cfg.workers), [&](std::size_t f) {
    const auto& held = folds[f];
    std::vector<Index> train;
    train.reserve(static_cast<std::size_t>(M) - held.size());
    std::size_t h = 0;
    for (Index mu = 0; mu < M; ++mu) {
      if (h < held.size() && held[h] == mu) {
        ++h;
        continue;
      }
      train.push_back(mu);
    }
    const ProblemInstance sub = inst.select_rows(train);
    std::optional<VectorXd> warm;
    for (std::size_t l = 0; l < L; ++l) {
      auto [sol, rep] = solve_lasso(sub, lambda_grid[l], warm, cfg);
      warm = sol.x1;
      if (!rep.converged) fold_failed[f][l] = 1;
      if (estimator == Estimator::Type2) sol = debias(sub, std::move(sol));
      const VectorXd& x = estimate_for(sol, estimator);
      for (Index mu : held) {
        const double r = inst.y()(mu) - inst.A().row(mu).dot(x);
        terms(static_cast<Index>(l), mu) = 0.5 * r * r;
      }
    }
  });

  std::mt19937_64 rng(derive_seed(seed, 1));
  std::uniform_int_distribution<Index> pick(0, M - 1);
  std::vector<LooEstimate> out(L);
  for (std::size_t l = 0; l < L; ++l) {
    LooEstimate& est = out[l];
    est.lambda = lambda_grid[l];
    est.method = LooMethod::KFold;
    est.estimator = estimator;
    for (const auto& ff : fold_failed) est.unstable = est.unstable || ff[l] != 0;
    est.per_mu_terms = terms.row(static_cast<Index>(l)).transpose();
    est.looe = est.per_mu_terms.mean();
    double s = 0.0, ss = 0.0;
    for (int b = 0; b < resamples; ++b) {
      double mean = 0.0;
      for (Index draw = 0; draw < M; ++draw) mean += est.per_mu_terms(pick(rng));
      mean /= static_cast<double>(M);
      s += mean;
      ss += mean * mean;
    }
    const double R = static_cast<double>(resamples);
    est.std_error = resamples > 1 ? std::sqrt(std::max(0.0, (ss - s * s / R) / (R - 1.0))) : 0.0;
  }
  return out;
}

}  // namespace fastloo

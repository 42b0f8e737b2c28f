#include <gtest/gtest.h>

#include <set>

#include "test_util.hpp"

using namespace fastloo;

TEST(NaiveCv, AllFoldsInactiveGivesMeanSquare) {
  const auto inst = fixtures::random_instance(12, 20, 1);
  double lam = 0.0;
  for (Index mu = 0; mu < inst.M(); ++mu) lam = std::max(lam, lambda_max(inst.without_row(mu)));
  const auto est = naive_loo(inst, 1.01 * lam, Estimator::Type1, fixtures::config({1.0}));
  EXPECT_NEAR(est.looe, 0.5 * inst.y().squaredNorm() / inst.M(), 1e-14);
  EXPECT_FALSE(est.unstable);
}

TEST(NaiveCv, IdenticalObservationsGiveZeroError) {
  const ProblemInstance inst(MatrixXd::Ones(2, 1), VectorXd::Ones(2));
  const auto est = naive_loo(inst, 0.0, Estimator::Type1, fixtures::config({0.0}));
  EXPECT_NEAR(est.looe, 0.0, 1e-20);
}

TEST(NaiveCv, RejectsSingleObservation) {
  const ProblemInstance inst(MatrixXd::Ones(1, 2), VectorXd::Ones(1));
  EXPECT_THROW(naive_loo(inst, 0.1, Estimator::Type1, fixtures::config({0.1})), InputError);
}

TEST(NaiveCv, AgreesWithApprox1OnEnsemble) {
  double dev = 0.0;
  int n = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto [inst, truth] = sample_instance(fixtures::ensemble_spec(128, 0.8, 0.2, seed));
    const auto cfg = fixtures::config(log_grid(0.3, 0.03, 20));
    const auto path = solve_path(inst, cfg);
    const auto naive = naive_loo_path(inst, Estimator::Type1, cfg);
    for (std::size_t l = 0; l < path.solutions.size(); ++l) {
      dev += std::abs(looe_approx1(inst, path.solutions[l], Estimator::Type1).looe - naive[l].looe) / naive[l].looe;
      ++n;
    }
  }
  EXPECT_LT(dev / n, 0.05);
}

TEST(NaiveCv, ZeroActiveRegimeSharesFormulaWithApprox1) {
  // Both reduce to half the mean squared response when nothing is active.
  const auto inst = fixtures::random_instance(10, 20, 4);
  const double lam = 10.0 * lambda_max(inst);
  const auto [sol, rep] = solve_lasso(inst, lam, fixtures::config({lam}));
  const auto fast = looe_approx1(inst, sol, Estimator::Type1);
  const auto naive = naive_loo(inst, lam, Estimator::Type1, fixtures::config({lam}));
  EXPECT_NEAR(fast.looe, naive.looe, 1e-15);
}

TEST(NaiveCv, Type2DebiasesEachFold) {
  const auto [inst, truth] = sample_instance(fixtures::ensemble_spec(40, 0.8, 0.2, 2));
  const double lam = 0.1;
  const auto est = naive_loo(inst, lam, Estimator::Type2, fixtures::config({lam}));
  const auto cfg = fixtures::config({lam});
  double total = 0.0;
  for (Index mu = 0; mu < inst.M(); ++mu) {
    const auto fold = inst.without_row(mu);
    const auto sol = debias(fold, solve_lasso(fold, lam, cfg).first);
    const double r = inst.y()(mu) - inst.A().row(mu).dot(*sol.x2);
    total += 0.5 * r * r;
  }
  EXPECT_NEAR(est.looe, total / inst.M(), 1e-8 * est.looe);
}

TEST(NaiveCv, FoldsArePartition) {
  const auto folds = make_folds(23, 5, 42);
  std::set<Index> seen;
  std::size_t smallest = 100, largest = 0;
  for (const auto& f : folds) {
    smallest = std::min(smallest, f.size());
    largest = std::max(largest, f.size());
    for (Index i : f) EXPECT_TRUE(seen.insert(i).second);
  }
  EXPECT_EQ(seen.size(), 23u);
  EXPECT_LE(largest - smallest, 1u);
  EXPECT_EQ(folds, make_folds(23, 5, 42));
  EXPECT_THROW(make_folds(5, 6, 0), InputError);
  EXPECT_THROW(make_folds(5, 1, 0), InputError);
}

TEST(NaiveCv, KFoldWithKEqualMMatchesLoo) {
  const auto [inst, truth] = sample_instance(fixtures::ensemble_spec(30, 0.8, 0.2, 5));
  const auto grid = log_grid(0.5, 0.05, 5);
  const auto kf = kfold_cv(inst, grid, static_cast<int>(inst.M()), Estimator::Type1, 3, fixtures::config(grid));
  // Cold-started folds converge to the same minimizer as warm-started ones.
  const auto loo = naive_loo_path(inst, Estimator::Type1, fixtures::config(grid));
  for (std::size_t l = 0; l < grid.size(); ++l)
    EXPECT_LT((kf[l].per_mu_terms - loo[l].per_mu_terms).lpNorm<Eigen::Infinity>(), 1e-8);
}

TEST(NaiveCv, KFoldAboveMaxCorrelation) {
  const auto inst = fixtures::random_instance(20, 30, 6);
  const double lam = 10.0 * lambda_max(inst);
  const auto kf = kfold_cv(inst, {lam}, 4, Estimator::Type1, 0, fixtures::config({lam}));
  EXPECT_NEAR(kf[0].looe, 0.5 * inst.y().squaredNorm() / inst.M(), 1e-14);
  EXPECT_GT(kf[0].std_error, 0.0);
}

TEST(NaiveCv, KFoldDeterministicAcrossWorkers) {
  const auto [inst, truth] = sample_instance(fixtures::ensemble_spec(50, 0.8, 0.2, 6));
  const auto grid = log_grid(0.5, 0.05, 6);
  auto cfg1 = fixtures::config(grid);
  auto cfg4 = cfg1;
  cfg4.workers = 4;
  const auto a = kfold_cv(inst, grid, 10, Estimator::Type1, 9, cfg1);
  const auto b = kfold_cv(inst, grid, 10, Estimator::Type1, 9, cfg4);
  for (std::size_t l = 0; l < grid.size(); ++l) {
    EXPECT_EQ(a[l].looe, b[l].looe);
    EXPECT_EQ(a[l].std_error, b[l].std_error);
  }
}

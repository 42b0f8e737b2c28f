#include <gtest/gtest.h>

#include "test_util.hpp"

using namespace fastloo;

TEST(Amp, LargePenaltyGivesZeroFixedPoint) {
  const auto inst = fixtures::random_instance(20, 40, 1);
  const double lambda = 1.01 * lambda_max(inst);
  const auto r = amp_solve_x1(inst, lambda, fixtures::config({lambda}));
  EXPECT_TRUE(r.report.converged);
  EXPECT_TRUE(r.solution.x1.isZero(0.0));
  EXPECT_LT((r.state.a - inst.y()).lpNorm<Eigen::Infinity>(), 1e-12);
}

TEST(Amp, MatchesCoordinateDescentAndKkt) {
  const auto [inst, truth] = sample_instance(fixtures::ensemble_spec(400, 0.5, 0.1, 11));
  const double lambda = 0.03 * lambda_max(inst);
  const auto cfg = fixtures::config({lambda});
  const auto r = amp_solve_x1(inst, lambda, cfg);
  ASSERT_TRUE(r.report.converged);
  const auto [cd, rep] = solve_lasso(inst, lambda, cfg);
  EXPECT_LT((r.solution.x1 - cd.x1).lpNorm<Eigen::Infinity>(), 1e-4);

  // Fixed-point relations and the correspondence with the subgradient conditions.
  const double tol = 1e-6;
  EXPECT_LT((r.state.a - (inst.y() - inst.A() * r.state.x)).lpNorm<Eigen::Infinity>(), tol);
  for (Index i = 0; i < inst.N(); ++i) {
    const double h = r.state.h(i), x = r.state.x(i);
    if (x == 0.0) {
      EXPECT_LE(std::abs(h), lambda + tol);
    } else {
      EXPECT_NEAR(h - r.state.gamma * x, x > 0 ? lambda : -lambda, tol);
    }
  }
  EXPECT_NEAR(r.state.gamma, inst.alpha() - r.solution.rho, 1e-2);
}

TEST(Amp, DebiasedSingleColumn) {
  MatrixXd A(4, 1);
  A << 1.0, 2.0, 0.0, 1.0;
  VectorXd y(4);
  y << 1.0, 2.0, 3.0, 4.0;
  const ProblemInstance inst(A, y);
  LassoSolution base;
  base.lambda = 0.5;
  base.x1 = VectorXd::Constant(1, 1.4);
  base.active_set = {0};
  const auto r = amp_solve_x2(inst, base, fixtures::config({0.5}));
  EXPECT_TRUE(r.report.converged);
  EXPECT_NEAR(r.x2(0), 1.5, 1e-8);
}

TEST(Amp, DebiasedEmptySupport) {
  const auto inst = fixtures::random_instance(10, 20, 3);
  LassoSolution base;
  base.x1 = VectorXd::Zero(20);
  const auto r = amp_solve_x2(inst, base, fixtures::config({1.0}));
  EXPECT_TRUE(r.x2.isZero(0.0));
}

TEST(Amp, DebiasedMatchesLeastSquares) {
  const auto [inst, truth] = sample_instance(fixtures::ensemble_spec(400, 0.5, 0.1, 12));
  const double lambda = 0.05 * lambda_max(inst);
  const auto cfg = fixtures::config({lambda});
  const auto base = debias(inst, solve_lasso(inst, lambda, cfg).first);
  const auto r = amp_solve_x2(inst, base, cfg);
  ASSERT_TRUE(r.report.converged);
  EXPECT_LT((r.x2 - *base.x2).lpNorm<Eigen::Infinity>(), 1e-4);
}

TEST(Amp, IterationStaysFiniteAndFailsCleanly) {
  // A badly conditioned non-ensemble design: two nearly identical columns, many rows.
  MatrixXd A = MatrixXd::Ones(30, 2);
  A(0, 1) = 1.0 + 1e-9;
  const ProblemInstance inst(A, VectorXd::LinSpaced(30, -1, 1));
  auto cfg = fixtures::config({1e-6});
  cfg.max_iter = 2000;
  const auto r = amp_solve_x1(inst, 1e-6, cfg);
  EXPECT_TRUE(r.state.x.allFinite());
  EXPECT_TRUE(std::isfinite(r.state.gamma));
}

TEST(Amp, RejectsNonPositivePenalty) {
  const auto inst = fixtures::random_instance(10, 20, 3);
  EXPECT_THROW(amp_solve_x1(inst, 0.0, fixtures::config({1.0})), InputError);
}

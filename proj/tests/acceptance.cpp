#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/quadrature/exp_sinh.hpp>

#include "commands.hpp"
#include "fastloo.hpp"

using namespace fastloo;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

EnsembleSpec ensemble(Index N, double alpha, double rho_hat, std::uint64_t seed) {
  EnsembleSpec s;
  s.N = N;
  s.alpha = alpha;
  s.rho_hat = rho_hat;
  s.sigma_x2 = 1.0;
  s.sigma_xi2 = 0.001;
  s.seed = seed;
  return s;
}

// Mid-range penalties at (alpha, rho_hat) = (0.8, 0.2): rho runs from about 0.15 to 0.38.
std::vector<double> mid_grid() { return log_grid(0.3, 0.03, 20); }

std::vector<double> replica_grid() { return log_grid(std::sqrt(10.0), 1e-4, 250); }

const ReplicaEnsemble kLeft{0.5, 0.1, 1.0, 0.001};
const ReplicaEnsemble kRight{0.8, 0.2, 1.0, 0.001};

Outcome kkt_certification() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  int solves = 0;
  bool all_converged = true;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto [inst, truth] = sample_instance(ensemble(64, 0.8, 0.2, seed));
    const double lm = lambda_max(inst);
    RunConfig cfg;
    cfg.lambda_grid = log_grid(lm, lm * 1e-4, 20);
    const auto path = solve_path(inst, cfg);
    all_converged = all_converged && path.all_converged();
    for (const auto& s : path.solutions) {
      worst = std::max(worst, kkt_residual(inst, s.x1, s.lambda));
      ++solves;
    }
  }
  const double t = seconds_since(t0);
  return {worst <= 1e-8 && all_converged && t < 60.0,
          fmt("max subgradient violation %.2e over %d solves (limit 1e-8), %.1f s (limit 60 s)", worst, solves, t)};
}

double fast_vs_naive(Index N) {
  double dev = 0.0;
  int n = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto [inst, truth] = sample_instance(ensemble(N, 0.8, 0.2, seed));
    RunConfig cfg;
    cfg.lambda_grid = mid_grid();
    const auto path = solve_path(inst, cfg);
    const auto naive = naive_loo_path(inst, Estimator::Type1, cfg);
    for (std::size_t l = 0; l < path.solutions.size(); ++l) {
      const double fast = looe_approx1(inst, path.solutions[l], Estimator::Type1).looe;
      dev += std::abs(fast - naive[l].looe) / naive[l].looe;
      ++n;
    }
  }
  return dev / n;
}

Outcome oracle_equivalence() {
  const double d128 = fast_vs_naive(128);
  const double d256 = fast_vs_naive(256);
  return {d128 < 0.05 && d256 < 0.03,
          fmt("mean |approx1 - naive| / naive: N=128 %.2f%% (limit 5%%), N=256 %.2f%% (limit 3%%)", 100 * d128,
              100 * d256)};
}

Outcome sherman_morrison() {
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> g;
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int k = std::uniform_int_distribution<int>(1, 40)(rng);
    const int M = std::uniform_int_distribution<int>(std::min(60, (3 * k + 1) / 2 + 1), 60)(rng);
    MatrixXd A(M, k);
    for (Index i = 0; i < A.size(); ++i) A.data()[i] = g(rng) / std::sqrt(static_cast<double>(M));
    const ProblemInstance inst(A, VectorXd::Zero(M));
    LassoSolution sol;
    sol.x1 = VectorXd::Ones(k);
    for (Index j = 0; j < k; ++j) sol.active_set.push_back(j);
    const ActiveGram gram(inst, sol);
    for (Index mu = 0; mu < M; ++mu) {
      const auto direct = downdated_inverse_direct(gram, mu);
      if (!direct) continue;
      worst = std::max(worst, (susceptibility_cavity(gram, mu) - *direct).lpNorm<Eigen::Infinity>());
    }
  }
  return {worst < 1e-8, fmt("max |rank-one update - direct inverse| = %.2e over 1000 designs (limit 1e-8)", worst)};
}

struct Sweeps {
  ReplicaSweep left, right;
  double t_left = 0.0, t_right = 0.0;
};

const Sweeps& sweeps() {
  static const Sweeps s = [] {
    Sweeps out;
    auto t0 = Clock::now();
    out.left = sweep_lambda(kLeft, replica_grid());
    out.t_left = seconds_since(t0);
    t0 = Clock::now();
    out.right = sweep_lambda(kRight, replica_grid());
    out.t_right = seconds_since(t0);
    return out;
  }();
  return s;
}

Outcome replica_identities() {
  double chi = 0, qhat = 0, chi2 = 0, eps = 0;
  int n = 0, failed = 0;
  for (const auto* pair : {&sweeps().left, &sweeps().right}) {
    const double a = pair == &sweeps().left ? kLeft.alpha : kRight.alpha;
    for (const auto& p : pair->points) {
      if (!p.converged) {
        ++failed;
        continue;
      }
      ++n;
      chi = std::max(chi, std::abs(p.s1.chi1 - p.rho / (a - p.rho)));
      qhat = std::max(qhat, std::abs(p.s1.Q1_hat - (a - p.rho)));
      chi2 = std::max(chi2, std::abs(p.s2.chi2 - p.s1.chi1));
      eps = std::max(eps, std::abs(p.eps1 - p.s1.chi1_hat / (2 * a)));
    }
  }
  return {chi < 1e-8 && qhat < 1e-8 && chi2 < 1e-8 && eps < 1e-10 && n > 0,
          fmt("%d points (%d unconverged): |chi1-rho/(a-rho)| %.1e, |Q1hat-(a-rho)| %.1e, |chi2-chi1| %.1e, "
              "|eps1-chi1hat/2a| %.1e",
              n, failed, chi, qhat, chi2, eps)};
}

Outcome roc_marked_points() {
  struct Expect {
    const std::optional<MarkedPoint>* got;
    double fp, tp;
    const char* name;
  };
  const auto& s = sweeps();
  const Expect rows[] = {
      {&s.left.min_looe1, 0.24, 0.93, "a=0.5 min looe1"},   {&s.left.max_youden, 0.078, 0.87, "a=0.5 Youden"},
      {&s.left.min_looe2, 0.068, 0.86, "a=0.5 min looe2"},  {&s.right.min_looe1, 0.37, 0.96, "a=0.8 min looe1"},
      {&s.right.max_youden, 0.11, 0.89, "a=0.8 Youden"},    {&s.right.min_looe2, 0.13, 0.91, "a=0.8 min looe2"},
  };
  bool ok = s.t_left < 30.0 && s.t_right < 30.0;
  std::string detail;
  for (const auto& r : rows) {
    if (!r.got->has_value()) {
      ok = false;
      detail += fmt("%s missing; ", r.name);
      continue;
    }
    const auto& m = **r.got;
    ok = ok && std::abs(m.fp - r.fp) <= 0.01 && std::abs(m.tp - r.tp) <= 0.01;
    detail += fmt("%s (%.3f,%.3f) vs (%.3f,%.2f); ", r.name, m.fp, m.tp, r.fp, r.tp);
  }
  detail += fmt("sweeps %.2f s and %.2f s (limit 30 s)", s.t_left, s.t_right);
  return {ok, detail};
}

Outcome incorrect_formula_limit() {
  bool ok = true;
  std::string detail;
  for (const auto* sw : {&sweeps().left, &sweeps().right}) {
    const auto& pts = sw->points;
    double worst = 0.0;
    for (std::size_t i = pts.size() - 3; i < pts.size(); ++i) {
      ok = ok && pts[i].converged && pts[i].looe2_incorrect < 0.1 * pts[i].looe2_correct;
      worst = std::max(worst, pts[i].looe2_incorrect / pts[i].looe2_correct);
    }
    const auto& last = pts.back();
    detail += fmt("alpha=%.1f rho=%.4f: max incorrect/correct %.4f (limit 0.1), correct %.4g vs looe1 %.4g; ",
                  sw == &sweeps().left ? kLeft.alpha : kRight.alpha, last.rho, worst, last.looe2_correct,
                  last.looe1);
  }
  return {ok, detail};
}

struct FiniteSize {
  double eps_dev = 0.0;
  double looe_dev = 0.0;
  double mean_dev = 0.0;
};

FiniteSize finite_size(Index N) {
  const auto grid = mid_grid();
  std::vector<double> eps(grid.size(), 0.0), loo(grid.size(), 0.0);
  const int samples = 100;
  for (int s = 0; s < samples; ++s) {
    const auto [inst, truth] = sample_instance(ensemble(N, 0.8, 0.2, 77), static_cast<std::uint64_t>(s));
    RunConfig cfg;
    cfg.lambda_grid = grid;
    const auto path = solve_path(inst, cfg);
    for (std::size_t l = 0; l < grid.size(); ++l) {
      eps[l] += rss(inst, path.solutions[l].x1).eps / samples;
      loo[l] += looe_approx1(inst, path.solutions[l], Estimator::Type1).looe / samples;
    }
  }
  FiniteSize out;
  const ReplicaPathPoint* prev = nullptr;
  std::vector<ReplicaPathPoint> theory;
  theory.reserve(grid.size());
  for (double lambda : grid) {
    theory.push_back(evaluate_replica_point(kRight, lambda, EosOptions{}, prev));
    prev = &theory.back();
  }
  for (std::size_t l = 0; l < grid.size(); ++l) {
    const double de = std::abs(eps[l] - theory[l].eps1) / theory[l].eps1;
    const double dl = std::abs(loo[l] - theory[l].looe1) / theory[l].looe1;
    out.eps_dev = std::max(out.eps_dev, de);
    out.looe_dev = std::max(out.looe_dev, dl);
    out.mean_dev += (de + dl) / (2.0 * grid.size());
  }
  return out;
}

Outcome finite_size_agreement() {
  const auto big = finite_size(256);
  const auto small = finite_size(16);
  const bool ok = big.eps_dev < 0.05 && big.looe_dev < 0.05 && small.mean_dev > big.mean_dev;
  return {ok, fmt("N=256 max rel. dev. eps1 %.2f%%, approx LOOE %.2f%% (limit 5%%); mean dev. N=16 %.2f%% > "
                  "N=256 %.2f%%",
                  100 * big.eps_dev, 100 * big.looe_dev, 100 * small.mean_dev, 100 * big.mean_dev)};
}

Outcome speedup() {
  const auto [inst, truth] = sample_instance(ensemble(400, 0.5, 0.1, 5));
  const double lm = lambda_max(inst);
  RunConfig cfg;
  cfg.lambda_grid = log_grid(lm, lm * 1e-2, 30);
  cfg.workers = 1;
  auto t0 = Clock::now();
  const auto path = solve_path(inst, cfg);
  double sink = 0.0;
  for (const auto& sol : path.solutions) sink += looe_approx1(inst, sol, Estimator::Type1).looe;
  const double fast = seconds_since(t0);
  t0 = Clock::now();
  const auto naive = naive_loo_path(inst, Estimator::Type1, cfg);
  const double slow = seconds_since(t0);
  sink += naive.front().looe;
  return {std::isfinite(sink) && fast <= slow / 5.0,
          fmt("single fit + approx1 %.3f s, brute-force LOO %.3f s, ratio %.1f (need >= 5)", fast, slow, slow / fast)};
}

Outcome amp_equivalence() {
  double worst = 0.0;
  int solves = 0, failures = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto [inst, truth] = sample_instance(ensemble(400, 0.5, 0.1, 100 + seed));
    const double lm = lambda_max(inst);
    const auto grid = parse_lambda_spec("auto", lm);
    std::vector<double> middle;
    for (double l : grid)
      if (l <= lm * 1e-1 * (1 + 1e-12) && l >= lm * 1e-3 * (1 - 1e-12)) middle.push_back(l);
    RunConfig cfg;
    cfg.lambda_grid = middle;
    const auto path = solve_path(inst, cfg);
    for (std::size_t l = 0; l < middle.size(); ++l) {
      const auto amp = amp_solve_x1(inst, middle[l], cfg);
      failures += !amp.report.converged;
      worst = std::max(worst, (amp.solution.x1 - path.solutions[l].x1).lpNorm<Eigen::Infinity>());
      ++solves;
    }
  }
  return {worst < 1e-4 && failures == 0,
          fmt("max |x_amp - x_cd|_inf = %.2e over %d solves, %d unconverged (limit 1e-4)", worst, solves, failures)};
}

Outcome special_functions() {
  boost::math::quadrature::exp_sinh<double> integrator;
  const auto tail = [&](double theta, auto f) {
    return integrator.integrate([&](double t) { return f(theta + t) * normal_pdf(theta + t); }, 0.0,
                                std::numeric_limits<double>::infinity());
  };
  double e_err = 0, f_err = 0, g_err = 0, identity = 0;
  const double lambda = 0.9;
  for (int i = 0; i <= 200; ++i) {
    const double theta = 0.01 * std::pow(800.0, i / 200.0);
    for (int k = 0; k <= 2; ++k)
      e_err = std::max(e_err, std::abs(gauss_tail_moment(k, theta) - tail(theta, [k](double z) { return std::pow(z, k); })));
    const double sq = tail(theta, [theta](double z) { return (z - theta) * (z - theta); });
    const double F = F_func(theta, lambda);
    f_err = std::max(f_err, std::abs(F - lambda * lambda / (theta * theta) * sq));
    g_err = std::max(g_err, std::abs(G_func(theta, lambda) -
                                     theta * theta * theta / (lambda * lambda) * tail(theta, [](double z) { return z; })));
    const double closed = lambda * lambda / (theta * theta) * shifted_second_moment(theta);
    identity = std::max(identity, std::abs(F - closed) / std::max(1.0, std::abs(closed)));
  }
  return {e_err < 1e-10 && f_err < 1e-10 && g_err < 1e-10 && identity < 1e-12,
          fmt("max error vs quadrature: E_k %.1e, F %.1e, G %.1e (limit 1e-10); F identity %.1e (limit 1e-12)", e_err,
              f_err, g_err, identity)};
}

Outcome determinism() {
  cli::SynthOptions o;
  o.Ns = {16, 32, 64};
  o.samples = 5;
  o.seed = 123;
  o.lambdas = "log:1:0.01:10";
  o.naive = true;
  std::string out[3];
  int codes[3];
  const int workers[3] = {1, 1, 8};
  for (int i = 0; i < 3; ++i) {
    o.solver.workers = workers[i];
    std::ostringstream s, log;
    codes[i] = cli::cmd_synth(o, s, log);
    out[i] = s.str();
  }
  const bool same_runs = out[0] == out[1];
  const bool same_workers = out[0] == out[2];
  return {codes[0] == 0 && codes[1] == 0 && codes[2] == 0 && same_runs && same_workers && !out[0].empty(),
          fmt("%zu bytes; repeat run identical: %s; workers 1 vs 8 identical: %s", out[0].size(),
              same_runs ? "yes" : "no", same_workers ? "yes" : "no")};
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<Outcome()> run;
  };
  const Criterion criteria[] = {
      {"KKT certification", kkt_certification},
      {"fast LOO vs brute-force LOO", oracle_equivalence},
      {"Sherman-Morrison vs direct inverse", sherman_morrison},
      {"replica closed-form identities", replica_identities},
      {"ROC marked points", roc_marked_points},
      {"incorrect debiased LOO formula vanishes as rho -> alpha", incorrect_formula_limit},
      {"finite-size vs analytic curves", finite_size_agreement},
      {"speedup over brute force", speedup},
      {"AMP vs coordinate descent", amp_equivalence},
      {"special functions vs quadrature", special_functions},
      {"synth determinism", determinism},
  };
  int failures = 0;
  int index = 1;
  for (const auto& c : criteria) {
    const auto t0 = Clock::now();
    Outcome r;
    try {
      r = c.run();
    } catch (const std::exception& e) {
      r = {false, std::string("exception: ") + e.what()};
    }
    failures += !r.pass;
    std::printf("[%s] %2d %s: %s [%.1f s]\n", r.pass ? "PASS" : "FAIL", index++, c.name, r.detail.c_str(),
                seconds_since(t0));
    std::fflush(stdout);
  }
  std::printf("%d of %d acceptance criteria passed\n", 11 - failures, 11);
  return failures == 0 ? 0 : 1;
}

#include <iostream>

#include "CLI11.hpp"
#include "commands.hpp"

namespace {

void add_solver_flags(CLI::App* cmd, fastloo::cli::SolverFlags& s) {
  cmd->add_option("--active-threshold", s.active_threshold, "Magnitude at or above which a component is active")
      ->capture_default_str();
  cmd->add_option("--solver-tol", s.solver_tol, "KKT tolerance, scaled by 1 + ||y||")->capture_default_str();
  cmd->add_option("--max-iter", s.max_iter, "Coordinate-descent sweep limit")->capture_default_str();
  cmd->add_option("--workers", s.workers, "Worker threads (0: FASTLOO_WORKERS or all cores)")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  namespace cli = fastloo::cli;
  CLI::App app{"Fast leave-one-out cross-validation for the LASSO"};
  app.require_subcommand(1);

  cli::PathOptions path;
  auto* p = app.add_subcommand("path", "Solve a LASSO path on CSV data and report LOO errors per penalty");
  p->add_option("--A", path.a_path, "Design matrix CSV (M rows, N columns)")->required();
  p->add_option("--y", path.y_path, "Response CSV (M rows, one column)")->required();
  p->add_flag("--header", path.header, "Skip one header line in each CSV");
  p->add_option("--lambdas", path.lambdas, "auto[:K], K, log:HI:LO:K or a comma list")->capture_default_str();
  p->add_option("--estimator", path.estimator, "1: LASSO, 2: least squares on the active set")
      ->check(CLI::IsMember({1, 2}))
      ->capture_default_str();
  p->add_option("--method", path.method, "approx1, approx2, naive or kfold:<k>")->capture_default_str();
  p->add_flag("--standardize", path.standardize, "Centre columns of A and scale them to unit norm");
  p->add_option("--format", path.format, "jsonl or csv")->capture_default_str();
  p->add_option("--out", path.out, "Output file (default stdout)");
  p->add_option("--seed", path.seed, "Seed for k-fold partitions and resampling")->capture_default_str();
  add_solver_flags(p, path.solver);

  cli::SynthOptions synth;
  auto* s = app.add_subcommand("synth", "Finite-size experiments on the Gaussian ensemble with analytic curves");
  s->add_option("--N", synth.Ns, "System sizes")->delimiter(',')->capture_default_str();
  s->add_option("--alpha", synth.alpha, "M / N")->capture_default_str();
  s->add_option("--rho-hat", synth.rho_hat, "Fraction of nonzero signal components")->capture_default_str();
  s->add_option("--sigma-x2", synth.sigma_x2, "Signal variance")->capture_default_str();
  s->add_option("--sigma-xi2", synth.sigma_xi2, "Noise variance")->capture_default_str();
  s->add_option("--samples", synth.samples, "Samples per size")->capture_default_str();
  s->add_option("--seed", synth.seed, "Base seed")->capture_default_str();
  s->add_option("--lambdas", synth.lambdas, "log:HI:LO:K or a comma list")->capture_default_str();
  s->add_flag("--naive", synth.naive, "Also run brute-force LOO for both estimators");
  s->add_option("--max-work", synth.max_work, "Abort above this estimated multiply-add count")
      ->capture_default_str();
  s->add_option("--format", synth.format, "jsonl or csv")->capture_default_str();
  s->add_option("--out", synth.out, "Output file (default stdout)");
  add_solver_flags(s, synth.solver);

  cli::ReplicaOptions rep;
  auto* r = app.add_subcommand("replica", "Analytic curves from the replica equations of state");
  r->add_option("--alpha", rep.alpha, "M / N, below 1")->required();
  r->add_option("--rho-hat", rep.rho_hat, "Fraction of nonzero signal components")->required();
  r->add_option("--sigma-x2", rep.sigma_x2, "Signal variance")->capture_default_str();
  r->add_option("--sigma-xi2", rep.sigma_xi2, "Noise variance")->capture_default_str();
  r->add_option("--lambdas", rep.lambdas, "log:HI:LO:K or a comma list")->capture_default_str();
  bool no_refine = false;
  r->add_flag("--no-refine", no_refine, "Report marked points on the grid without refinement");
  r->add_flag("--multistart", rep.multistart, "Report the spread of rho over several starting points");
  r->add_option("--format", rep.format, "jsonl or csv")->capture_default_str();
  r->add_option("--out", rep.out, "Output file (default stdout)");

  cli::GenerateOptions gen;
  auto* g = app.add_subcommand("generate", "Write a synthetic instance as CSV files");
  g->add_option("--N", gen.N, "Number of predictors")->capture_default_str();
  g->add_option("--alpha", gen.alpha, "M / N")->capture_default_str();
  g->add_option("--rho-hat", gen.rho_hat, "Fraction of nonzero signal components")->capture_default_str();
  g->add_option("--sigma-x2", gen.sigma_x2, "Signal variance")->capture_default_str();
  g->add_option("--sigma-xi2", gen.sigma_xi2, "Noise variance")->capture_default_str();
  g->add_option("--seed", gen.seed, "Seed")->capture_default_str();
  g->add_option("--sample", gen.sample, "Sample index within the seed")->capture_default_str();
  g->add_option("--A-out", gen.a_out, "Path for A")->required();
  g->add_option("--y-out", gen.y_out, "Path for y")->required();
  g->add_option("--truth-out", gen.truth_out, "Path for the planted signal");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(cli::kBadInput);
  }

  if (*p) return cli::cmd_path(path, std::cout, std::cerr);
  if (*s) return cli::cmd_synth(synth, std::cout, std::cerr);
  if (*r) {
    rep.refine = !no_refine;
    return cli::cmd_replica(rep, std::cout, std::cerr);
  }
  return cli::cmd_generate(gen, std::cout, std::cerr);
}

#pragma once

#include <cmath>
#include <cstdint>
#include <exception>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "fastloo.hpp"
#include "json.hpp"

namespace fastloo::cli {

using Json = nlohmann::ordered_json;

enum ExitCode : int { kOk = 0, kBadInput = 2, kNonConvergence = 3, kResourceGuard = 4 };

class ResourceGuardError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Format { Jsonl, Csv };

inline Format parse_format(const std::string& s) {
  if (s == "jsonl") return Format::Jsonl;
  if (s == "csv") return Format::Csv;
  throw InputError("unknown format '" + s + "' (expected jsonl or csv)");
}

inline Json number(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

inline Json number(const std::optional<double>& v) { return v ? number(*v) : Json(nullptr); }

/// Emits a provenance record followed by data records. In CSV mode records of
/// the table kind become rows under a header taken from the first such
/// record; every other record becomes a '#'-prefixed JSON comment line.
class RecordWriter {
 public:
  RecordWriter(std::ostream& out, Format fmt, std::string table_kind)
      : out_(out), fmt_(fmt), table_kind_(std::move(table_kind)) {}

  void provenance(const std::string& command, const Json& flags) {
    Json rec;
    rec["record"] = "provenance";
    rec["tool"] = "fastloo";
    rec["command"] = command;
    rec["flags"] = flags;
    comment_or_line(rec);
  }

  void write(const Json& rec) {
    if (fmt_ == Format::Jsonl || rec.value("record", "") != table_kind_) {
      comment_or_line(rec);
      return;
    }
    if (columns_.empty()) {
      for (const auto& [key, value] : rec.items())
        if (key != "record") columns_.push_back(key);
      for (std::size_t i = 0; i < columns_.size(); ++i) out_ << (i ? "," : "") << columns_[i];
      out_ << '\n';
    }
    for (std::size_t i = 0; i < columns_.size(); ++i) {
      if (i) out_ << ',';
      const auto it = rec.find(columns_[i]);
      if (it == rec.end() || it->is_null()) continue;
      if (it->is_number_float()) {
        out_ << format_number(it->get<double>());
      } else if (it->is_string()) {
        out_ << it->get<std::string>();
      } else {
        out_ << it->dump();
      }
    }
    out_ << '\n';
  }

 private:
  void comment_or_line(const Json& rec) {
    if (fmt_ == Format::Csv) out_ << "# ";
    out_ << rec.dump() << '\n';
  }

  std::ostream& out_;
  Format fmt_;
  std::string table_kind_;
  std::vector<std::string> columns_;
};

/// Opens `path` for writing, or returns `fallback` when path is empty or "-".
class OutputTarget {
 public:
  OutputTarget(const std::string& path, std::ostream& fallback) : stream_(&fallback) {
    if (!path.empty() && path != "-") {
      file_.open(path);
      if (!file_) throw CsvError(CsvErrorKind::Unreadable, path + ": cannot open for writing");
      stream_ = &file_;
    }
  }
  std::ostream& get() { return *stream_; }

 private:
  std::ofstream file_;
  std::ostream* stream_;
};

struct SolverFlags {
  double active_threshold = 1e-6;
  double solver_tol = 1e-10;
  int max_iter = 100000;
  int workers = 0;

  RunConfig config(std::vector<double> grid) const {
    RunConfig cfg;
    cfg.lambda_grid = std::move(grid);
    cfg.active_threshold = active_threshold;
    cfg.solver_tol = solver_tol;
    cfg.max_iter = max_iter;
    cfg.workers = workers;
    cfg.validate();
    return cfg;
  }

  // Worker count is left out on purpose: it never changes the output.
  void add_to(Json& flags) const {
    flags["active-threshold"] = active_threshold;
    flags["solver-tol"] = solver_tol;
    flags["max-iter"] = max_iter;
  }
};

/// Runs `body`, mapping library exceptions to exit codes and messages on `log`.
template <class Body>
int guarded(std::ostream& log, Body&& body) {
  try {
    return body();
  } catch (const CsvError& e) {
    log << "error (" << to_string(e.kind()) << "): " << e.what() << '\n';
    return kBadInput;
  } catch (const InputError& e) {
    log << "error: " << e.what() << '\n';
    return kBadInput;
  } catch (const ResourceGuardError& e) {
    log << "error: " << e.what() << '\n';
    return kResourceGuard;
  }
}

// ---------------------------------------------------------------- path

struct PathOptions {
  std::string a_path;
  std::string y_path;
  bool header = false;
  std::string lambdas = "auto:50";
  int estimator = 1;
  std::string method = "approx1";
  bool standardize = false;
  std::string format = "jsonl";
  std::string out;
  std::uint64_t seed = 0;
  SolverFlags solver;
};

struct ParsedMethod {
  LooMethod method = LooMethod::Approx1;
  int k = 0;
};

inline ParsedMethod parse_method(const std::string& s) {
  if (s == "approx1") return {LooMethod::Approx1, 0};
  if (s == "approx2") return {LooMethod::Approx2, 0};
  if (s == "naive") return {LooMethod::Naive, 0};
  if (s.rfind("kfold:", 0) == 0) {
    try {
      std::size_t used = 0;
      const int k = std::stoi(s.substr(6), &used);
      if (used == s.size() - 6) return {LooMethod::KFold, k};
    } catch (const std::exception&) {
    }
  }
  throw InputError("unknown method '" + s + "' (expected approx1, approx2, naive or kfold:<k>)");
}

inline Estimator parse_estimator(int e) {
  if (e == 1) return Estimator::Type1;
  if (e == 2) return Estimator::Type2;
  throw InputError("estimator must be 1 or 2");
}

inline int cmd_path(const PathOptions& o, std::ostream& stdout_stream, std::ostream& log) {
  return guarded(log, [&] {
    const Format fmt = parse_format(o.format);
    const ParsedMethod pm = parse_method(o.method);
    const Estimator est = parse_estimator(o.estimator);

    MatrixXd A = read_csv_matrix(o.a_path, o.header);
    const VectorXd y = read_csv_vector(o.y_path, o.header);
    for (const auto& d : validate_instance(A, y))
      if (d.severity == Severity::Warning) log << "warning: " << d.message << '\n';
    if (o.standardize) A = standardize_columns(std::move(A));
    const ProblemInstance inst(std::move(A), y);

    bool reversed = false;
    const RunConfig cfg = o.solver.config(parse_lambda_spec(o.lambdas, lambda_max(inst), &reversed));
    if (reversed) log << "note: ascending lambda grid reversed to descending order\n";
    const auto& grid = cfg.lambda_grid;
    const std::size_t L = grid.size();

    if (est == Estimator::Type2 && (pm.method == LooMethod::Approx1 || pm.method == LooMethod::Approx2))
      log << "warning: single-fit LOO formulas are biased for the debiased estimator; "
             "use --method naive for the correct value\n";
    if (est == Estimator::Type2 && pm.method == LooMethod::Naive)
      log << "warning: brute-force LOO refits the LASSO " << inst.M() << " times per penalty\n";

    const PathResult path = solve_path(inst, cfg);
    std::vector<LassoSolution> debiased(L);
    std::vector<LooEstimate> loo(L);
    std::vector<double> ratio(L, std::numeric_limits<double>::quiet_NaN());

    parallel_for(L, resolve_workers(cfg.workers), [&](std::size_t l) {
      debiased[l] = debias(inst, path.solutions[l]);
    });

    switch (pm.method) {
      case LooMethod::Approx1:
      case LooMethod::Approx2:
        parallel_for(L, resolve_workers(cfg.workers), [&](std::size_t l) {
          const LassoSolution& sol = debiased[l];
          LooEstimate second;
          bool second_ok = true;
          try {
            second = looe_approx2(inst, sol, est);
          } catch (const std::domain_error&) {
            second_ok = false;
            second.lambda = sol.lambda;
            second.method = LooMethod::Approx2;
            second.estimator = est;
            second.invalid_approximation = est == Estimator::Type2;
            second.looe = second.std_error = std::numeric_limits<double>::quiet_NaN();
            second.unstable = true;
          }
          if (pm.method == LooMethod::Approx1) {
            loo[l] = looe_approx1(inst, sol, est);
            if (second_ok && second.looe > 0.0) ratio[l] = loo[l].looe / second.looe;
          } else {
            loo[l] = second;
          }
        });
        break;
      case LooMethod::Naive: loo = naive_loo_path(inst, est, cfg); break;
      case LooMethod::KFold: loo = kfold_cv(inst, grid, pm.k, est, o.seed, cfg); break;
    }

    OutputTarget target(o.out, stdout_stream);
    RecordWriter w(target.get(), fmt, "path");
    Json flags;
    flags["A"] = o.a_path;
    flags["y"] = o.y_path;
    flags["header"] = o.header;
    flags["lambdas"] = o.lambdas;
    flags["estimator"] = o.estimator;
    flags["method"] = o.method;
    flags["standardize"] = o.standardize;
    flags["seed"] = o.seed;
    o.solver.add_to(flags);
    w.provenance("path", flags);

    bool nonconverged = !path.all_converged();
    std::vector<CvPoint> points;
    for (std::size_t l = 0; l < L; ++l) {
      const LassoSolution& sol = debiased[l];
      const bool fold_failure = (pm.method == LooMethod::Naive || pm.method == LooMethod::KFold) && loo[l].unstable;
      nonconverged = nonconverged || fold_failure;
      Json rec;
      rec["record"] = "path";
      rec["lambda"] = sol.lambda;
      rec["df"] = sol.df();
      rec["rho"] = sol.rho;
      rec["rss1"] = rss(inst, sol.x1).eps;
      rec["rss2"] = rss(inst, *sol.x2).eps;
      rec["looe"] = number(loo[l].looe);
      rec["looe_se"] = number(loo[l].std_error);
      rec["method"] = to_string(pm.method);
      rec["estimator"] = static_cast<int>(o.estimator);
      rec["unstable"] = loo[l].unstable;
      rec["converged"] = path.reports[l].converged;
      rec["invalid_approximation"] = loo[l].invalid_approximation;
      rec["approx_ratio"] = number(ratio[l]);
      w.write(rec);
      if (std::isfinite(loo[l].looe) && std::isfinite(loo[l].std_error))
        points.push_back({sol.lambda, loo[l].looe, loo[l].std_error});
    }

    if (!points.empty()) {
      const double best = points[argmin_looe(points)].lambda;
      const double one_se = one_standard_error(points);
      const auto df_at = [&](double lambda) {
        for (const auto& s : debiased)
          if (s.lambda == lambda) return s.df();
        return Index{-1};
      };
      Json sel;
      sel["record"] = "selection";
      sel["argmin_lambda"] = best;
      sel["argmin_df"] = df_at(best);
      sel["one_se_lambda"] = one_se;
      sel["one_se_df"] = df_at(one_se);
      w.write(sel);
      log << "argmin lambda = " << format_number(best) << " (df = " << df_at(best) << ")\n";
      log << "one-standard-error lambda = " << format_number(one_se) << " (df = " << df_at(one_se) << ")\n";
    }
    if (nonconverged) {
      log << "error: solver did not converge at some penalties (results written)\n";
      return static_cast<int>(kNonConvergence);
    }
    return static_cast<int>(kOk);
  });
}

// ---------------------------------------------------------------- synth

struct SynthOptions {
  std::vector<int> Ns{16, 32, 64, 128, 256};
  double alpha = 0.8;
  double rho_hat = 0.2;
  double sigma_x2 = 1.0;
  double sigma_xi2 = 0.001;
  int samples = 10;
  std::uint64_t seed = 0;
  std::string lambdas = "log:1:0.01:30";
  bool naive = false;
  double max_work = 1e11;
  std::string format = "jsonl";
  std::string out;
  SolverFlags solver;
};

/// Per-sample observables at one penalty.
struct SampleRecord {
  double eps1 = 0, eps2 = 0, rho = 0, mse1 = 0, mse2 = 0;
  std::optional<double> tp, fp;
  double looe1_a1 = 0, looe1_a2 = 0, looe2_a1 = 0, looe2_a2 = 0;
  double looe1_naive = 0, looe2_naive = 0;
  bool converged = true;
};

/// Mean and standard deviation over samples divided by sqrt(count - 1),
/// taken over the finite values only.
struct Aggregate {
  double mean = std::numeric_limits<double>::quiet_NaN();
  double err = std::numeric_limits<double>::quiet_NaN();
  int count = 0;
};

inline Aggregate aggregate(const std::vector<double>& v) {
  Aggregate a;
  double s = 0.0;
  for (double x : v)
    if (std::isfinite(x)) {
      s += x;
      ++a.count;
    }
  if (a.count == 0) return a;
  a.mean = s / a.count;
  if (a.count > 1) {
    double ss = 0.0;
    for (double x : v)
      if (std::isfinite(x)) ss += (x - a.mean) * (x - a.mean);
    a.err = std::sqrt(ss / a.count) / std::sqrt(static_cast<double>(a.count - 1));
  }
  return a;
}

/// Multiply-add count used by the resource guard.
inline double synth_work(const SynthOptions& o, std::size_t grid_size) {
  double total = 0.0;
  for (int N : o.Ns) {
    EnsembleSpec spec;
    spec.N = N;
    spec.alpha = o.alpha;
    const double M = static_cast<double>(spec.M());
    total += static_cast<double>(o.samples) * static_cast<double>(grid_size) * M * N * (o.naive ? M : 1.0);
  }
  return total;
}

inline int cmd_synth(const SynthOptions& o, std::ostream& stdout_stream, std::ostream& log) {
  return guarded(log, [&] {
    const Format fmt = parse_format(o.format);
    if (o.samples < 1) throw InputError("--samples must be at least 1");
    if (o.Ns.empty()) throw InputError("--N needs at least one size");
    if (o.lambdas.rfind("auto", 0) == 0 ||
        (!o.lambdas.empty() && o.lambdas.find_first_not_of("0123456789") == std::string::npos))
      throw InputError("synth needs an explicit grid (list or log:HI:LO:K); automatic grids depend on the instance");
    bool reversed = false;
    const RunConfig cfg =
        o.solver.config(parse_lambda_spec(o.lambdas, std::numeric_limits<double>::quiet_NaN(), &reversed));
    if (reversed) log << "note: ascending lambda grid reversed to descending order\n";
    const auto& grid = cfg.lambda_grid;
    const std::size_t L = grid.size();

    std::vector<EnsembleSpec> specs;
    for (int N : o.Ns) {
      EnsembleSpec s;
      s.N = N;
      s.alpha = o.alpha;
      s.rho_hat = o.rho_hat;
      s.sigma_x2 = o.sigma_x2;
      s.sigma_xi2 = o.sigma_xi2;
      s.seed = o.seed;
      s.validate();
      specs.push_back(s);
    }
    const double work = synth_work(o, L);
    if (work > o.max_work)
      throw ResourceGuardError("estimated work " + format_number(work) + " exceeds --max-work " +
                               format_number(o.max_work));

    const std::size_t S = static_cast<std::size_t>(o.samples);
    // results[n * S + s][l]
    std::vector<std::vector<SampleRecord>> results(specs.size() * S, std::vector<SampleRecord>(L));
    const int workers = resolve_workers(cfg.workers);
    RunConfig inner = cfg;
    inner.workers = 1;

    parallel_for(results.size(), workers, [&](std::size_t task) {
      const EnsembleSpec& spec = specs[task / S];
      const auto [inst, truth] = sample_instance(spec, task % S);
      const PathResult path = solve_path(inst, inner);
      std::vector<LooEstimate> naive1, naive2;
      if (o.naive) {
        naive1 = naive_loo_path(inst, Estimator::Type1, inner);
        naive2 = naive_loo_path(inst, Estimator::Type2, inner);
      }
      const auto approx2_or_nan = [&](const LassoSolution& sol, Estimator e) {
        try {
          return looe_approx2(inst, sol, e).looe;
        } catch (const std::domain_error&) {
          return std::numeric_limits<double>::quiet_NaN();
        }
      };
      for (std::size_t l = 0; l < L; ++l) {
        const LassoSolution sol = debias(inst, path.solutions[l]);
        SampleRecord& r = results[task][l];
        r.converged = path.reports[l].converged;
        r.eps1 = rss(inst, sol.x1).eps;
        r.eps2 = rss(inst, *sol.x2).eps;
        r.rho = sol.rho;
        r.mse1 = mse(sol.x1, truth);
        r.mse2 = mse(*sol.x2, truth);
        const TpFp t = tp_fp(sol, truth);
        r.tp = t.tp;
        r.fp = t.fp;
        r.looe1_a1 = looe_approx1(inst, sol, Estimator::Type1).looe;
        r.looe2_a1 = looe_approx1(inst, sol, Estimator::Type2).looe;
        r.looe1_a2 = approx2_or_nan(sol, Estimator::Type1);
        r.looe2_a2 = approx2_or_nan(sol, Estimator::Type2);
        if (o.naive) {
          r.looe1_naive = naive1[l].looe;
          r.looe2_naive = naive2[l].looe;
          r.converged = r.converged && !naive1[l].unstable && !naive2[l].unstable;
        }
      }
    });

    std::vector<std::optional<ReplicaPathPoint>> theory(L);
    {
      const ReplicaEnsemble ens{o.alpha, o.rho_hat, o.sigma_x2, o.sigma_xi2};
      const ReplicaPathPoint* prev = nullptr;
      for (std::size_t l = 0; l < L; ++l) {
        theory[l] = evaluate_replica_point(ens, grid[l], EosOptions{}, prev);
        if (theory[l]->converged) {
          prev = &*theory[l];
        } else {
          theory[l].reset();
        }
      }
    }

    OutputTarget target(o.out, stdout_stream);
    RecordWriter w(target.get(), fmt, "synth");
    Json flags;
    flags["N"] = o.Ns;
    flags["alpha"] = o.alpha;
    flags["rho-hat"] = o.rho_hat;
    flags["sigma-x2"] = o.sigma_x2;
    flags["sigma-xi2"] = o.sigma_xi2;
    flags["samples"] = o.samples;
    flags["seed"] = o.seed;
    flags["lambdas"] = o.lambdas;
    flags["naive"] = o.naive;
    flags["max-work"] = o.max_work;
    o.solver.add_to(flags);
    w.provenance("synth", flags);

    int unconverged_total = 0;
    for (std::size_t n = 0; n < specs.size(); ++n) {
      for (std::size_t l = 0; l < L; ++l) {
        const auto column = [&](auto get) {
          std::vector<double> v;
          v.reserve(S);
          for (std::size_t s = 0; s < S; ++s) v.push_back(get(results[n * S + s][l]));
          return aggregate(v);
        };
        const auto opt_value = [](const std::optional<double>& x) {
          return x ? *x : std::numeric_limits<double>::quiet_NaN();
        };
        int unconverged = 0;
        for (std::size_t s = 0; s < S; ++s) unconverged += !results[n * S + s][l].converged;
        unconverged_total += unconverged;

        Json rec;
        rec["record"] = "synth";
        rec["N"] = specs[n].N;
        rec["M"] = specs[n].M();
        rec["lambda"] = grid[l];
        rec["samples"] = o.samples;
        const auto put = [&](const char* name, const Aggregate& a) {
          rec[name] = number(a.mean);
          rec[std::string(name) + "_err"] = number(a.err);
        };
        put("eps1", column([](const SampleRecord& r) { return r.eps1; }));
        put("eps2", column([](const SampleRecord& r) { return r.eps2; }));
        put("rho", column([](const SampleRecord& r) { return r.rho; }));
        put("tp", column([&](const SampleRecord& r) { return opt_value(r.tp); }));
        put("fp", column([&](const SampleRecord& r) { return opt_value(r.fp); }));
        put("mse1", column([](const SampleRecord& r) { return r.mse1; }));
        put("mse2", column([](const SampleRecord& r) { return r.mse2; }));
        put("looe1_approx1", column([](const SampleRecord& r) { return r.looe1_a1; }));
        put("looe1_approx2", column([](const SampleRecord& r) { return r.looe1_a2; }));
        put("looe2_approx1", column([](const SampleRecord& r) { return r.looe2_a1; }));
        put("looe2_approx2", column([](const SampleRecord& r) { return r.looe2_a2; }));
        if (o.naive) {
          put("looe1_naive", column([](const SampleRecord& r) { return r.looe1_naive; }));
          put("looe2_naive", column([](const SampleRecord& r) { return r.looe2_naive; }));
        }
        rec["unconverged"] = unconverged;
        const auto& th = theory[l];
        rec["replica_rho"] = th ? number(th->rho) : Json(nullptr);
        rec["replica_eps1"] = th ? number(th->eps1) : Json(nullptr);
        rec["replica_eps2"] = th ? number(th->eps2) : Json(nullptr);
        rec["replica_looe1"] = th ? number(th->looe1) : Json(nullptr);
        rec["replica_looe2_correct"] = th ? number(th->looe2_correct) : Json(nullptr);
        rec["replica_looe2_incorrect"] = th ? number(th->looe2_incorrect) : Json(nullptr);
        rec["replica_mse1"] = th ? number(th->mse1) : Json(nullptr);
        rec["replica_mse2"] = th ? number(th->mse2) : Json(nullptr);
        w.write(rec);
      }
    }
    if (unconverged_total > 0) {
      log << "error: " << unconverged_total << " (sample, penalty) solves did not converge (results written)\n";
      return static_cast<int>(kNonConvergence);
    }
    return static_cast<int>(kOk);
  });
}

// ---------------------------------------------------------------- replica

struct ReplicaOptions {
  double alpha = 0.5;
  double rho_hat = 0.1;
  double sigma_x2 = 1.0;
  double sigma_xi2 = 0.001;
  std::string lambdas = "log:3.1622776601683795:0.0001:250";
  bool refine = true;
  bool multistart = false;
  std::string format = "jsonl";
  std::string out;
};

inline int cmd_replica(const ReplicaOptions& o, std::ostream& stdout_stream, std::ostream& log) {
  return guarded(log, [&] {
    const Format fmt = parse_format(o.format);
    const ReplicaEnsemble ens{o.alpha, o.rho_hat, o.sigma_x2, o.sigma_xi2};
    ens.validate();
    if (o.lambdas.rfind("auto", 0) == 0 ||
        (!o.lambdas.empty() && o.lambdas.find_first_not_of("0123456789") == std::string::npos))
      throw InputError("replica needs an explicit grid (list or log:HI:LO:K)");
    bool reversed = false;
    const auto grid = parse_lambda_spec(o.lambdas, std::numeric_limits<double>::quiet_NaN(), &reversed);
    if (reversed) log << "note: ascending lambda grid reversed to descending order\n";

    const EosOptions eos;
    const ReplicaSweep sweep = sweep_lambda(ens, grid, eos, o.refine);

    OutputTarget target(o.out, stdout_stream);
    RecordWriter w(target.get(), fmt, "replica");
    Json flags;
    flags["alpha"] = o.alpha;
    flags["rho-hat"] = o.rho_hat;
    flags["sigma-x2"] = o.sigma_x2;
    flags["sigma-xi2"] = o.sigma_xi2;
    flags["lambdas"] = o.lambdas;
    flags["refine"] = o.refine;
    flags["multistart"] = o.multistart;
    w.provenance("replica", flags);
    if (o.rho_hat == 0.0) log << "note: rho_hat = 0, TP is undefined and reported as null\n";

    const bool tp_defined = o.rho_hat > 0.0;
    const bool fp_defined = o.rho_hat < 1.0;
    bool failed = false;
    for (const auto& p : sweep.points) {
      failed = failed || !p.converged;
      Json rec;
      rec["record"] = "replica";
      rec["lambda"] = p.lambda;
      rec["converged"] = p.converged;
      const auto v = [&](double x) { return p.converged ? number(x) : Json(nullptr); };
      rec["rho"] = v(p.rho);
      rec["tp"] = tp_defined ? v(p.TP) : Json(nullptr);
      rec["fp"] = fp_defined ? v(p.FP) : Json(nullptr);
      rec["youden"] = tp_defined && fp_defined ? v(p.youden) : Json(nullptr);
      rec["eps1"] = v(p.eps1);
      rec["eps2"] = v(p.eps2);
      rec["looe1"] = v(p.looe1);
      rec["looe2_correct"] = v(p.looe2_correct);
      rec["looe2_incorrect"] = v(p.looe2_incorrect);
      rec["mse1"] = v(p.mse1);
      rec["mse2"] = v(p.mse2);
      rec["chi1"] = v(p.s1.chi1);
      rec["Q1"] = v(p.s1.Q1);
      rec["m1"] = v(p.s1.m1);
      rec["chi1_hat"] = v(p.s1.chi1_hat);
      rec["Q1_hat"] = v(p.s1.Q1_hat);
      rec["theta_A"] = v(p.s1.theta_A);
      rec["theta_I"] = v(p.s1.theta_I);
      rec["chi2"] = v(p.s2.chi2);
      rec["Q2"] = v(p.s2.Q2);
      rec["m2"] = v(p.s2.m2);
      rec["chi_c"] = v(p.s2.chi_c);
      rec["Q_c"] = v(p.s2.Q_c);
      if (o.multistart) {
        double spread = std::numeric_limits<double>::quiet_NaN();
        try {
          spread = eos1_multistart_spread(ReplicaParams(ens, p.lambda), eos);
        } catch (const EosNonConvergence<ReplicaState1>&) {
        }
        rec["multistart_spread"] = number(spread);
      }
      w.write(rec);
    }
    const auto mark = [&](const char* kind, const std::optional<MarkedPoint>& m) {
      if (!m) return;
      Json rec;
      rec["record"] = "marked";
      rec["kind"] = kind;
      rec["lambda"] = m->lambda;
      rec["fp"] = fp_defined ? number(m->fp) : Json(nullptr);
      rec["tp"] = tp_defined ? number(m->tp) : Json(nullptr);
      rec["rho"] = m->rho;
      rec["value"] = m->value;
      rec["refined"] = m->refined;
      w.write(rec);
      log << kind << ": lambda = " << format_number(m->lambda) << ", (FP, TP) = (" << m->fp << ", " << m->tp
          << ")\n";
    };
    mark("min_looe1", sweep.min_looe1);
    mark("max_youden", sweep.max_youden);
    mark("min_looe2", sweep.min_looe2);
    if (failed) {
      log << "error: equations of state did not converge at some penalties (results written)\n";
      return static_cast<int>(kNonConvergence);
    }
    return static_cast<int>(kOk);
  });
}

// ---------------------------------------------------------------- generate

struct GenerateOptions {
  int N = 64;
  double alpha = 0.5;
  double rho_hat = 0.1;
  double sigma_x2 = 1.0;
  double sigma_xi2 = 0.001;
  std::uint64_t seed = 0;
  std::uint64_t sample = 0;
  std::string a_out;
  std::string y_out;
  std::string truth_out;
};

inline int cmd_generate(const GenerateOptions& o, std::ostream&, std::ostream& log) {
  return guarded(log, [&] {
    if (o.a_out.empty() || o.y_out.empty()) throw InputError("--A-out and --y-out are required");
    EnsembleSpec spec;
    spec.N = o.N;
    spec.alpha = o.alpha;
    spec.rho_hat = o.rho_hat;
    spec.sigma_x2 = o.sigma_x2;
    spec.sigma_xi2 = o.sigma_xi2;
    spec.seed = o.seed;
    const auto [inst, truth] = sample_instance(spec, o.sample);
    write_csv(o.a_out, inst.A());
    write_csv(o.y_out, MatrixXd(inst.y()));
    if (!o.truth_out.empty()) write_csv(o.truth_out, MatrixXd(truth.x_hat));
    log << "wrote " << inst.M() << "x" << inst.N() << " instance\n";
    return static_cast<int>(kOk);
  });
}

}  // namespace fastloo::cli

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace fastloo {

using Index = Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Raised for malformed user input (bad dimensions, non-finite data, bad grids).
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class Severity { Warning, Error };

enum class DiagnosticKind {
  DimensionMismatch,
  NonFiniteEntry,
  EmptyDimension,
  Overdetermined,  // alpha >= 1
};

struct Diagnostic {
  Severity severity;
  DiagnosticKind kind;
  std::string message;
};

inline bool has_errors(const std::vector<Diagnostic>& diags) {
  return std::any_of(diags.begin(), diags.end(),
                     [](const Diagnostic& d) { return d.severity == Severity::Error; });
}

/// Checks a candidate (A, y) pair. Returns one entry per violated invariant;
/// alpha >= 1 is reported as a warning only.
inline std::vector<Diagnostic> validate_instance(const MatrixXd& A, const VectorXd& y) {
  std::vector<Diagnostic> out;
  if (A.rows() < 1 || A.cols() < 1) {
    out.push_back({Severity::Error, DiagnosticKind::EmptyDimension,
                   "design matrix must have at least one row and one column"});
  }
  if (A.rows() != y.size()) {
    out.push_back({Severity::Error, DiagnosticKind::DimensionMismatch,
                   "design matrix has " + std::to_string(A.rows()) + " rows but response has " +
                       std::to_string(y.size()) + " entries"});
  }
  if (!A.allFinite()) {
    out.push_back({Severity::Error, DiagnosticKind::NonFiniteEntry,
                   "design matrix contains a non-finite entry"});
  }
  if (!y.allFinite()) {
    out.push_back({Severity::Error, DiagnosticKind::NonFiniteEntry,
                   "response vector contains a non-finite entry"});
  }
  if (A.rows() >= 1 && A.cols() >= 1 && A.rows() >= A.cols()) {
    out.push_back({Severity::Warning, DiagnosticKind::Overdetermined,
                   "alpha = M/N >= 1; fast LOO formulas remain evaluable but the "
                   "replica predictions do not apply"});
  }
  return out;
}

/// Design matrix A (M x N) and response y (length M). Immutable once built;
/// the constructor rejects anything validate_instance reports as an error.
class ProblemInstance {
 public:
  ProblemInstance(MatrixXd A, VectorXd y) : A_(std::move(A)), y_(std::move(y)) {
    auto diags = validate_instance(A_, y_);
    for (const auto& d : diags) {
      if (d.severity == Severity::Error) throw InputError(d.message);
    }
  }

  const MatrixXd& A() const { return A_; }
  const VectorXd& y() const { return y_; }
  Index M() const { return A_.rows(); }
  Index N() const { return A_.cols(); }
  double alpha() const { return static_cast<double>(M()) / static_cast<double>(N()); }

  /// Same instance with observation `mu` removed.
  ProblemInstance without_row(Index mu) const {
    if (M() < 2) throw InputError("cannot remove a row from a single-observation instance");
    MatrixXd A(M() - 1, N());
    VectorXd y(M() - 1);
    A.topRows(mu) = A_.topRows(mu);
    A.bottomRows(M() - 1 - mu) = A_.bottomRows(M() - 1 - mu);
    y.head(mu) = y_.head(mu);
    y.tail(M() - 1 - mu) = y_.tail(M() - 1 - mu);
    return ProblemInstance(std::move(A), std::move(y));
  }

  /// Sub-instance keeping the given rows, in the given order.
  ProblemInstance select_rows(const std::vector<Index>& rows) const {
    MatrixXd A(static_cast<Index>(rows.size()), N());
    VectorXd y(static_cast<Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      A.row(static_cast<Index>(r)) = A_.row(rows[r]);
      y(static_cast<Index>(r)) = y_(rows[r]);
    }
    return ProblemInstance(std::move(A), std::move(y));
  }

 private:
  MatrixXd A_;
  VectorXd y_;
};

inline std::vector<Diagnostic> validate_instance(const ProblemInstance& inst) {
  return validate_instance(inst.A(), inst.y());
}

/// Planted signal, noise and the generative parameters that produced them.
struct GroundTruth {
  VectorXd x_hat;
  VectorXd xi;
  double rho_hat = 0.0;
  double sigma_x2 = 1.0;
  double sigma_xi2 = 0.0;
};

/// LASSO estimate at one penalty value, optionally with its debiased companion.
struct LassoSolution {
  double lambda = 0.0;
  VectorXd x1;
  std::vector<Index> active_set;  // ascending
  std::optional<VectorXd> x2;     // zero off the active set
  double rho = 0.0;               // |active_set| / N
  bool rank_deficient = false;    // set by debias when the active Gram matrix is singular

  Index df() const { return static_cast<Index>(active_set.size()); }
};

enum class Estimator { Type1, Type2 };

inline const char* to_string(Estimator e) { return e == Estimator::Type1 ? "1" : "2"; }

struct RunConfig {
  std::vector<double> lambda_grid;
  double active_threshold = 1e-6;
  double solver_tol = 1e-10;
  int max_iter = 100000;
  double damping = 0.5;
  unsigned long long seed = 0;
  int workers = 0;  // 0: FASTLOO_WORKERS or hardware concurrency

  void validate() const {
    for (std::size_t i = 0; i < lambda_grid.size(); ++i) {
      if (!(lambda_grid[i] >= 0.0) || !std::isfinite(lambda_grid[i])) {
        throw InputError("lambda grid entries must be finite and non-negative");
      }
      if (i > 0 && !(lambda_grid[i] < lambda_grid[i - 1])) {
        throw InputError("lambda grid must be strictly descending");
      }
    }
    if (!(active_threshold > solver_tol)) {
      throw InputError("active_threshold must exceed solver_tol");
    }
    if (!(solver_tol > 0.0)) throw InputError("solver_tol must be positive");
    if (max_iter < 1) throw InputError("max_iter must be positive");
    if (!(damping > 0.0 && damping <= 1.0)) throw InputError("damping must lie in (0, 1]");
  }
};

/// Returns the grid in strictly descending order. Ascending input is reversed
/// and `reversed` is set so callers can emit a note; unsorted or duplicated
/// entries are rejected.
inline std::vector<double> normalize_lambda_grid(std::vector<double> grid, bool* reversed = nullptr) {
  if (reversed) *reversed = false;
  if (grid.empty()) throw InputError("lambda grid is empty");
  const bool ascending =
      grid.size() > 1 && std::is_sorted(grid.begin(), grid.end()) && grid.front() < grid.back();
  if (ascending) {
    std::reverse(grid.begin(), grid.end());
    if (reversed) *reversed = true;
  }
  RunConfig probe;
  probe.lambda_grid = grid;
  probe.validate();
  return grid;
}

/// Log-spaced descending grid from hi to lo inclusive.
inline std::vector<double> log_grid(double hi, double lo, int count) {
  if (count < 1 || !(hi > 0.0) || !(lo > 0.0) || lo > hi) {
    throw InputError("log grid needs count >= 1 and 0 < lo <= hi");
  }
  std::vector<double> g(static_cast<std::size_t>(count));
  if (count == 1) {
    g[0] = hi;
    return g;
  }
  const double lh = std::log(hi), ll = std::log(lo);
  for (int k = 0; k < count; ++k) {
    g[static_cast<std::size_t>(k)] = std::exp(lh + (ll - lh) * k / (count - 1));
  }
  g.front() = hi;
  g.back() = lo;
  return g;
}

}  // namespace fastloo

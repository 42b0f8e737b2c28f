#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "model.hpp"

namespace fastloo {

/// (1/N) ||x - x_hat||^2
inline double mse(const VectorXd& x, const GroundTruth& truth) {
  if (x.size() != truth.x_hat.size()) throw InputError("mse: length mismatch");
  return (x - truth.x_hat).squaredNorm() / static_cast<double>(x.size());
}

/// Either ratio is empty when its denominator (number of truly nonzero or
/// truly zero components) vanishes.
struct TpFp {
  std::optional<double> tp;
  std::optional<double> fp;
};

inline TpFp tp_fp(const std::vector<Index>& active_set, const GroundTruth& truth) {
  const Index N = truth.x_hat.size();
  std::vector<char> detected(static_cast<std::size_t>(N), 0);
  for (Index i : active_set) detected[static_cast<std::size_t>(i)] = 1;
  Index pos = 0, neg = 0, tp = 0, fp = 0;
  for (Index i = 0; i < N; ++i) {
    const bool truly = truth.x_hat(i) != 0.0;
    const bool hit = detected[static_cast<std::size_t>(i)] != 0;
    if (truly) {
      ++pos;
      tp += hit;
    } else {
      ++neg;
      fp += hit;
    }
  }
  TpFp out;
  if (pos > 0) out.tp = static_cast<double>(tp) / static_cast<double>(pos);
  if (neg > 0) out.fp = static_cast<double>(fp) / static_cast<double>(neg);
  return out;
}

inline TpFp tp_fp(const LassoSolution& sol, const GroundTruth& truth) {
  return tp_fp(sol.active_set, truth);
}

/// Youden-type distance from the diagonal, min_x {(TP-x)^2 + (FP-x)^2},
/// attained at x = (TP+FP)/2.
inline double youden(double tp, double fp) {
  const double d = tp - fp;
  return 0.5 * d * d;
}

struct CvPoint {
  double lambda;
  double looe;
  double std_error;
};

/// Largest lambda whose error is within one standard error of the minimum
/// (the standard error taken at the minimizer).
inline double one_standard_error(const std::vector<CvPoint>& points) {
  if (points.empty()) throw InputError("one_standard_error: empty input");
  std::size_t best = 0;
  for (std::size_t i = 1; i < points.size(); ++i) {
    const auto& p = points[i];
    const auto& b = points[best];
    if (p.looe < b.looe || (p.looe == b.looe && p.lambda > b.lambda)) best = i;
  }
  const double bound = points[best].looe + points[best].std_error;
  double chosen = points[best].lambda;
  for (const auto& p : points)
    if (p.looe <= bound && p.lambda > chosen) chosen = p.lambda;
  return chosen;
}

/// Index of the minimal error; ties go to the larger lambda.
inline std::size_t argmin_looe(const std::vector<CvPoint>& points) {
  if (points.empty()) throw InputError("argmin_looe: empty input");
  std::size_t best = 0;
  for (std::size_t i = 1; i < points.size(); ++i) {
    if (points[i].looe < points[best].looe ||
        (points[i].looe == points[best].looe && points[i].lambda > points[best].lambda))
      best = i;
  }
  return best;
}

struct RocPoint {
  double lambda;
  double fp;
  double tp;
};

/// Empirical ROC curve along a solution path; points with an undefined ratio are skipped.
inline std::vector<RocPoint> roc_curve(const std::vector<LassoSolution>& path, const GroundTruth& truth) {
  std::vector<RocPoint> out;
  for (const auto& sol : path) {
    auto r = tp_fp(sol, truth);
    if (r.tp && r.fp) out.push_back({sol.lambda, *r.fp, *r.tp});
  }
  return out;
}

/// Youden maximizer on a grid; the first (largest-lambda) maximizer wins ties.
inline std::optional<std::size_t> youden_argmax(const std::vector<RocPoint>& roc) {
  if (roc.empty()) return std::nullopt;
  std::size_t best = 0;
  double best_d = youden(roc[0].tp, roc[0].fp);
  for (std::size_t i = 1; i < roc.size(); ++i) {
    const double d = youden(roc[i].tp, roc[i].fp);
    const bool larger_lambda = roc[i].lambda > roc[best].lambda;
    if (d > best_d || (d == best_d && larger_lambda)) {
      best = i;
      best_d = d;
    }
  }
  return best;
}

}  // namespace fastloo

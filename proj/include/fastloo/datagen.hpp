#pragma once

#include <cfenv>
#include <cmath>
#include <cstdint>
#include <random>
#include <utility>

#include "model.hpp"

namespace fastloo {

/// Random-design ensemble: A_{mu i} ~ N(0, 1/N), Bernoulli-Gaussian signal,
/// Gaussian noise.
struct EnsembleSpec {
  Index N = 0;
  double alpha = 0.5;
  double rho_hat = 0.1;
  double sigma_x2 = 1.0;
  double sigma_xi2 = 0.0;
  std::uint64_t seed = 0;

  /// round(alpha * N), ties to even.
  Index M() const {
    const int old = std::fegetround();
    std::fesetround(FE_TONEAREST);
    const double m = std::nearbyint(alpha * static_cast<double>(N));
    std::fesetround(old);
    return static_cast<Index>(m);
  }

  void validate() const {
    if (N < 1) throw InputError("ensemble needs N >= 1");
    if (!(alpha > 0.0 && alpha < 1.0)) throw InputError("ensemble alpha must lie in (0, 1)");
    if (M() < 1) throw InputError("ensemble gives M = round(alpha*N) = 0");
    if (!(rho_hat >= 0.0 && rho_hat <= 1.0)) throw InputError("rho_hat must lie in [0, 1]");
    if (!(sigma_x2 > 0.0)) throw InputError("sigma_x2 must be positive");
    if (!(sigma_xi2 >= 0.0)) throw InputError("sigma_xi2 must be non-negative");
  }
};

inline std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Independent substream seed for (seed, stream index).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(splitmix64(seed) ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
}

/// Draws one instance. `sample_index` selects an independent substream so
/// samples can be produced in any order or in parallel.
inline std::pair<ProblemInstance, GroundTruth> sample_instance(const EnsembleSpec& spec,
                                                               std::uint64_t sample_index = 0) {
  spec.validate();
  const Index N = spec.N;
  const Index M = spec.M();
  std::mt19937_64 rng(derive_seed(spec.seed, sample_index));
  std::normal_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> coin(0.0, 1.0);

  const double a_scale = 1.0 / std::sqrt(static_cast<double>(N));
  MatrixXd A(M, N);
  for (Index j = 0; j < N; ++j)
    for (Index i = 0; i < M; ++i) A(i, j) = a_scale * unit(rng);

  GroundTruth truth;
  truth.rho_hat = spec.rho_hat;
  truth.sigma_x2 = spec.sigma_x2;
  truth.sigma_xi2 = spec.sigma_xi2;
  truth.x_hat = VectorXd::Zero(N);
  const double x_scale = std::sqrt(spec.sigma_x2);
  for (Index i = 0; i < N; ++i) {
    // Both draws are always consumed so the stream layout does not depend on rho_hat.
    const double u = coin(rng);
    const double g = unit(rng);
    if (u < spec.rho_hat) truth.x_hat(i) = x_scale * g;
  }
  truth.xi = VectorXd::Zero(M);
  const double noise_scale = std::sqrt(spec.sigma_xi2);
  for (Index mu = 0; mu < M; ++mu) truth.xi(mu) = noise_scale * unit(rng);

  VectorXd y = A * truth.x_hat + truth.xi;
  return {ProblemInstance(std::move(A), std::move(y)), std::move(truth)};
}

}  // namespace fastloo

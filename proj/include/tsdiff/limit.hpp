#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "tsdiff/model.hpp"
#include "tsdiff/paths.hpp"

namespace tsdiff {

// K independent discretized standard Brownian motions on [start, 1],
// starting from 0 at `start`.
struct BrownianPath {
  int dim = 0;
  double h = 0.0;
  double start = 0.0;
  std::int64_t steps = 0;
  std::uint64_t seed = 0;
  GridTable increments;  // steps rows
  GridTable path;        // steps + 1 rows

  double time(std::int64_t i) const { return start + static_cast<double>(i) * h; }
  // Linear interpolation of B_k at time t, clamped to [start, 1].
  double at(int k, double t) const;
};

// The step is shrunk to (1 - start) / ceil((1 - start) / h) so the grid ends
// exactly at 1.
BrownianPath brownian_path(int dim, double h, std::uint64_t seed, double start = 0.0);

enum class LimitSolver { SDE_EM, RANDOM_ODE };

struct LimitPath {
  LimitSolver solver = LimitSolver::SDE_EM;
  double h = 0.0;
  int arms = 0;
  std::uint64_t seed = 0;
  std::vector<double> times;
  GridTable R;
  GridTable noise;  // Y (SDE_EM) or B o R (RANDOM_ODE)
  BrownianPath brownian;

  std::int64_t steps() const { return static_cast<std::int64_t>(times.size()) - 1; }
  // R_k at time t (last grid time <= t).
  double occupation(int k, double t) const;
};

// Euler-Maruyama for dR_k = Gamma_k(R, Y) dt, dY_k = sqrt(Gamma_k(R, Y)) dB_k
// from R = Y = 0 (Lambda in LINEAR mode). Requires h <= 1e-3.
LimitPath solve_sde(const BanditSpec& spec, double h, std::uint64_t seed);

// Explicit Euler for dR_k/dt = Gamma_k(R, B o R) against one pre-sampled
// Brownian path per arm, B_k evaluated at R_k by linear interpolation.
LimitPath solve_random_ode(const BanditSpec& spec, double h, std::uint64_t seed);

// Variance-estimation limit started after the round-robin burn-in:
// R_k(t_eps) = t_eps / K, Y_k(t_eps) = B_k(t_eps) / sqrt(K), then
// Euler-Maruyama with the sigma-aware kernel up to t = 1.
LimitPath solve_sde_variance_start(const BanditSpec& spec, double h, std::uint64_t seed);

double rescaled_regret(const LimitPath& path, const BanditSpec& spec);

// Same layout as the discrete bundles: t, R_1..R_K, then Y_k or BR_k.
void write_columnar(std::ostream& out, const LimitPath& path);

}  // namespace tsdiff

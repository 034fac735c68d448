#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "tsdiff/model.hpp"
#include "tsdiff/paths.hpp"

namespace tsdiff {

enum class View { SDE_VIEW, ODE_VIEW };

// Finite-n Thompson sampling trajectory on t_j = j / n, j = 0..n.
//
// All tables have n + 1 rows except `play_prob` (one row per period, the
// kernel value at t_j that drove the play at period j + 1) and `arm_played`.
struct PathBundle {
  View view = View::SDE_VIEW;
  std::int64_t n = 0;
  int arms = 0;
  std::int64_t batch_size = 1;
  std::uint64_t seed = 0;

  GridTable R;      // occupation fractions
  GridTable noise;  // Y^n (SDE view) or Z^n o R^n (ODE view)
  GridTable M;      // martingale remainder
  GridTable B;      // normalized noise martingale (SDE view only)
  GridTable play_prob;
  std::vector<int> arm_played;
  std::vector<std::int64_t> final_plays;
  // ODE view: partial sums Z^n_k(i / n) of arm k's own reward stream,
  // i = 0..plays_k(1).
  std::vector<std::vector<double>> Z;

  double t(std::int64_t j) const { return static_cast<double>(j) / static_cast<double>(n); }
  // R^n_k(t) for t in [0, 1] (piecewise constant, right-continuous).
  double occupation(int k, double t) const;
};

struct AdaptiveVarianceState {
  GridTable sample_mean;      // raw reward mean per arm, NaN before the first play
  GridTable sample_variance;  // population variance, NaN before two plays
  std::vector<std::uint8_t> burn_in;  // per period
  std::int64_t burn_in_periods = 0;
};

struct VarianceRun {
  PathBundle bundle;
  AdaptiveVarianceState state;
};

// Exogenous-reward dynamics with a per-period kernel draw.
PathBundle simulate_sde_view(const BanditSpec& spec, const HorizonSpec& horizon, std::uint64_t seed);

// On-demand rewards: arm k consumes its own reward stream only when played.
PathBundle simulate_ode_view(const BanditSpec& spec, const HorizonSpec& horizon, std::uint64_t seed);

// Commits to one arm per batch of horizon.batch_size periods with the
// posterior frozen inside the batch. Requires batch_size <= n / 10 unless the
// batch size is 1.
PathBundle simulate_batched(const BanditSpec& spec, const HorizonSpec& horizon, std::uint64_t seed);

// Round-robin burn-in until t_j >= burn_in, then Thompson sampling with the
// running sample variances (ADAPTIVE) or unit variances (MISSPECIFIED_UNIT).
VarianceRun simulate_variance_adaptive(const BanditSpec& spec, const HorizonSpec& horizon,
                                       std::uint64_t seed);

// Regret / sqrt(n) = sum_k gap_k R^n_k(1).
double rescaled_regret(const PathBundle& bundle, const BanditSpec& spec);

// One row per grid point: t, R_1..R_K, Y_1..Y_K (or ZR_1..ZR_K), M_1..M_K,
// then B_1..B_K (SDE view) or Z_1..Z_K (ODE view, blank past the stream end).
void write_columnar(std::ostream& out, const PathBundle& bundle);

}  // namespace tsdiff

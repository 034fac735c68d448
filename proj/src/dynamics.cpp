#include "tsdiff/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>

#include "tsdiff/format.hpp"
#include "tsdiff/kernel.hpp"
#include "tsdiff/rng.hpp"

namespace tsdiff {

namespace {

// Lower clamp on the play probability before dividing by its square root.
constexpr double kProbFloor = 1e-300;

int sample_arm(std::span<const double> p, double uniform) {
  double acc = 0.0;
  const int last = static_cast<int>(p.size()) - 1;
  for (int k = 0; k < last; ++k) {
    acc += p[static_cast<std::size_t>(k)];
    if (uniform < acc) return k;
  }
  return last;
}

PathBundle make_bundle(View view, const BanditSpec& spec, std::int64_t n, std::int64_t batch,
                       std::uint64_t seed) {
  PathBundle b;
  b.view = view;
  b.n = n;
  b.arms = spec.arms;
  b.batch_size = batch;
  b.seed = seed;
  b.R = GridTable(n + 1, spec.arms);
  b.noise = GridTable(n + 1, spec.arms);
  b.M = GridTable(n + 1, spec.arms);
  if (view == View::SDE_VIEW) b.B = GridTable(n + 1, spec.arms);
  b.play_prob = GridTable(n, spec.arms);
  b.arm_played.resize(static_cast<std::size_t>(n));
  return b;
}

void require_known_unit(const BanditSpec& spec, const char* op) {
  if (spec.variance_mode != VarianceMode::KNOWN_UNIT)
    throw std::invalid_argument(std::string(op) + " requires KNOWN_UNIT variance mode");
}

// Shared by the per-period and batched simulators: the kernel is evaluated
// and an arm committed at the start of every batch.
PathBundle run_exogenous(const BanditSpec& spec, std::int64_t n, std::int64_t batch,
                         std::uint64_t seed) {
  const int K = spec.arms;
  const auto arms = static_cast<std::size_t>(K);
  KernelEvaluator kernel(spec);
  PathBundle b = make_bundle(View::SDE_VIEW, spec, n, batch, seed);

  Engine rng(seed);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::normal_distribution<double> normal;

  std::vector<double> u(arms, 0.0), y(arms, 0.0), m(arms, 0.0), bm(arms, 0.0), p(arms, 0.0);
  std::vector<std::int64_t> plays(arms, 0);
  const double inv_n = 1.0 / static_cast<double>(n);
  const double inv_sqrt_n = 1.0 / std::sqrt(static_cast<double>(n));

  int committed = 0;
  for (std::int64_t i = 0; i < n; ++i) {
    if (i % batch == 0) {
      kernel.evaluate(u, y, p);
      committed = sample_arm(p, uniform(rng));
    }
    const int arm = committed;
    const auto a = static_cast<std::size_t>(arm);
    std::copy(p.begin(), p.end(), b.play_prob.row(i).begin());
    b.arm_played[static_cast<std::size_t>(i)] = arm;

    // Only the played arm's exogenous reward is ever observed.
    const double centered = spec.sd(arm) * normal(rng);
    ++plays[a];
    u[a] = static_cast<double>(plays[a]) * inv_n;
    y[a] += centered * inv_sqrt_n;
    bm[a] += centered * inv_sqrt_n / std::sqrt(std::max(p[a], kProbFloor));
    for (std::size_t k = 0; k < arms; ++k) m[k] += ((k == a ? 1.0 : 0.0) - p[k]) * inv_n;

    for (int k = 0; k < K; ++k) {
      const auto kk = static_cast<std::size_t>(k);
      b.R(i + 1, k) = u[kk];
      b.noise(i + 1, k) = y[kk];
      b.M(i + 1, k) = m[kk];
      b.B(i + 1, k) = bm[kk];
    }
  }
  b.final_plays = plays;
  return b;
}

}  // namespace

double PathBundle::occupation(int k, double time) const {
  auto j = static_cast<std::int64_t>(std::floor(time * static_cast<double>(n) + 1e-9));
  j = std::clamp<std::int64_t>(j, 0, n);
  return R(j, k);
}

PathBundle simulate_sde_view(const BanditSpec& spec, const HorizonSpec& horizon, std::uint64_t seed) {
  require_valid(spec, horizon);
  require_known_unit(spec, "simulate_sde_view");
  return run_exogenous(spec, horizon.n, 1, seed);
}

PathBundle simulate_batched(const BanditSpec& spec, const HorizonSpec& horizon, std::uint64_t seed) {
  require_valid(spec, horizon);
  require_known_unit(spec, "simulate_batched");
  const std::int64_t m = horizon.batch_size;
  if (m > 1 && 10 * m > horizon.n)
    throw std::invalid_argument("batch size " + std::to_string(m) + " exceeds n / 10 for n = " +
                                std::to_string(horizon.n) +
                                "; batches must be o(n) for the unbatched limit to apply");
  return run_exogenous(spec, horizon.n, m, seed);
}

PathBundle simulate_ode_view(const BanditSpec& spec, const HorizonSpec& horizon, std::uint64_t seed) {
  require_valid(spec, horizon);
  require_known_unit(spec, "simulate_ode_view");
  const int K = spec.arms;
  const auto arms = static_cast<std::size_t>(K);
  const std::int64_t n = horizon.n;
  KernelEvaluator kernel(spec);
  PathBundle b = make_bundle(View::ODE_VIEW, spec, n, 1, seed);

  Engine select_rng(substream(seed, 0));
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::vector<Engine> reward_rng;
  std::vector<std::normal_distribution<double>> reward_normal(arms);
  reward_rng.reserve(arms);
  for (std::size_t k = 0; k < arms; ++k) reward_rng.emplace_back(substream(seed, k + 1));

  b.Z.assign(arms, std::vector<double>{0.0});
  std::vector<double> u(arms, 0.0), zr(arms, 0.0), m(arms, 0.0), p(arms, 0.0);
  std::vector<std::int64_t> plays(arms, 0);
  const double inv_n = 1.0 / static_cast<double>(n);
  const double inv_sqrt_n = 1.0 / std::sqrt(static_cast<double>(n));

  for (std::int64_t i = 0; i < n; ++i) {
    kernel.evaluate(u, zr, p);
    const int arm = sample_arm(p, uniform(select_rng));
    const auto a = static_cast<std::size_t>(arm);
    std::copy(p.begin(), p.end(), b.play_prob.row(i).begin());
    b.arm_played[static_cast<std::size_t>(i)] = arm;

    // Next unread entry of arm a's stream.
    const double centered = spec.sd(arm) * reward_normal[a](reward_rng[a]);
    b.Z[a].push_back(b.Z[a].back() + centered * inv_sqrt_n);
    ++plays[a];
    u[a] = static_cast<double>(plays[a]) * inv_n;
    zr[a] = b.Z[a][static_cast<std::size_t>(plays[a])];
    for (std::size_t k = 0; k < arms; ++k) m[k] += ((k == a ? 1.0 : 0.0) - p[k]) * inv_n;

    for (int k = 0; k < K; ++k) {
      const auto kk = static_cast<std::size_t>(k);
      b.R(i + 1, k) = u[kk];
      b.noise(i + 1, k) = zr[kk];
      b.M(i + 1, k) = m[kk];
    }
  }
  b.final_plays = plays;
  return b;
}

VarianceRun simulate_variance_adaptive(const BanditSpec& spec, const HorizonSpec& horizon,
                                       std::uint64_t seed) {
  require_valid(spec, horizon);
  if (spec.variance_mode == VarianceMode::KNOWN_UNIT)
    throw std::invalid_argument("simulate_variance_adaptive requires ADAPTIVE or MISSPECIFIED_UNIT");
  const int K = spec.arms;
  const auto arms = static_cast<std::size_t>(K);
  const std::int64_t n = horizon.n;
  const bool adaptive = spec.variance_mode == VarianceMode::ADAPTIVE;

  KernelEvaluator kernel(spec);
  VarianceRun run;
  PathBundle& b = run.bundle;
  b = make_bundle(View::SDE_VIEW, spec, n, 1, seed);
  AdaptiveVarianceState& st = run.state;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  st.sample_mean = GridTable(n + 1, K, nan);
  st.sample_variance = GridTable(n + 1, K, nan);
  st.burn_in.assign(static_cast<std::size_t>(n), 0);
  // Periods i with t_i < burn_in.
  st.burn_in_periods = std::min<std::int64_t>(
      n, static_cast<std::int64_t>(std::ceil(spec.burn_in * static_cast<double>(n) - 1e-9)));

  Engine rng(seed);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::normal_distribution<double> normal;

  const auto means = spec.rescaled_means();
  const double inv_n = 1.0 / static_cast<double>(n);
  const double sqrt_n = std::sqrt(static_cast<double>(n));
  const double inv_sqrt_n = 1.0 / sqrt_n;

  std::vector<double> u(arms, 0.0), y(arms, 0.0), m(arms, 0.0), bm(arms, 0.0), p(arms, 0.0);
  std::vector<double> var_scale(arms, 1.0), mean(arms, 0.0), m2(arms, 0.0);
  std::vector<std::int64_t> plays(arms, 0);

  for (std::int64_t i = 0; i < n; ++i) {
    int arm = 0;
    if (i < st.burn_in_periods) {
      st.burn_in[static_cast<std::size_t>(i)] = 1;
      arm = static_cast<int>(i % K);
      std::fill(p.begin(), p.end(), 0.0);
      p[static_cast<std::size_t>(arm)] = 1.0;
    } else {
      for (std::size_t k = 0; k < arms; ++k)
        var_scale[k] = adaptive ? std::max(m2[k] / static_cast<double>(plays[k]), kProbFloor) : 1.0;
      kernel.evaluate_scaled(u, y, var_scale, p);
      arm = sample_arm(p, uniform(rng));
    }
    const auto a = static_cast<std::size_t>(arm);
    std::copy(p.begin(), p.end(), b.play_prob.row(i).begin());
    b.arm_played[static_cast<std::size_t>(i)] = arm;

    const double sigma = spec.sd(arm);
    const double centered = sigma * normal(rng);
    const double reward = means[a] * inv_sqrt_n + centered;
    ++plays[a];
    // Welford update of the raw reward mean and sum of squared deviations.
    const double delta = reward - mean[a];
    mean[a] += delta / static_cast<double>(plays[a]);
    m2[a] += delta * (reward - mean[a]);

    u[a] = static_cast<double>(plays[a]) * inv_n;
    y[a] += centered * inv_sqrt_n;
    bm[a] += centered / sigma * inv_sqrt_n / std::sqrt(std::max(p[a], kProbFloor));
    for (std::size_t k = 0; k < arms; ++k) m[k] += ((k == a ? 1.0 : 0.0) - p[k]) * inv_n;

    for (int k = 0; k < K; ++k) {
      const auto kk = static_cast<std::size_t>(k);
      b.R(i + 1, k) = u[kk];
      b.noise(i + 1, k) = y[kk];
      b.M(i + 1, k) = m[kk];
      b.B(i + 1, k) = bm[kk];
      if (plays[kk] >= 1) st.sample_mean(i + 1, k) = mean[kk];
      if (plays[kk] >= 2) st.sample_variance(i + 1, k) = m2[kk] / static_cast<double>(plays[kk]);
    }
  }
  b.final_plays = plays;
  return run;
}

double rescaled_regret(const PathBundle& bundle, const BanditSpec& spec) {
  if (bundle.arms != spec.arms || bundle.R.points() != bundle.n + 1)
    throw std::invalid_argument("bundle does not match spec or is incomplete");
  const auto gaps = spec.rescaled_gaps();
  double regret = 0.0;
  for (int k = 0; k < spec.arms; ++k) regret += gaps[static_cast<std::size_t>(k)] * bundle.R(bundle.n, k);
  return regret;
}

void write_columnar(std::ostream& out, const PathBundle& bundle) {
  const int K = bundle.arms;
  const bool sde = bundle.view == View::SDE_VIEW;
  out << 't';
  for (int k = 1; k <= K; ++k) out << ",R_" << k;
  for (int k = 1; k <= K; ++k) out << (sde ? ",Y_" : ",ZR_") << k;
  for (int k = 1; k <= K; ++k) out << ",M_" << k;
  for (int k = 1; k <= K; ++k) out << (sde ? ",B_" : ",Z_") << k;
  out << '\n';
  for (std::int64_t j = 0; j <= bundle.n; ++j) {
    std::string line = format_double(bundle.t(j));
    for (int k = 0; k < K; ++k) line += ',' + format_double(bundle.R(j, k));
    for (int k = 0; k < K; ++k) line += ',' + format_double(bundle.noise(j, k));
    for (int k = 0; k < K; ++k) line += ',' + format_double(bundle.M(j, k));
    for (int k = 0; k < K; ++k) {
      line += ',';
      if (sde) {
        line += format_double(bundle.B(j, k));
      } else {
        const auto& z = bundle.Z[static_cast<std::size_t>(k)];
        if (static_cast<std::size_t>(j) < z.size()) line += format_double(z[static_cast<std::size_t>(j)]);
      }
    }
    out << line << '\n';
  }
}

}  // namespace tsdiff

#include "tsdiff/limit.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>

#include "tsdiff/format.hpp"
#include "tsdiff/kernel.hpp"
#include "tsdiff/rng.hpp"

namespace tsdiff {

namespace {

constexpr double kMaxStep = 1e-3;

void require_step(double h) {
  if (!(h > 0.0) || h > kMaxStep)
    throw std::invalid_argument("limit solvers require 0 < h <= 1e-3, got " + format_double(h));
}

std::int64_t step_count(double span, double h) {
  return std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(span / h - 1e-9)));
}

LimitPath make_path(LimitSolver solver, const BanditSpec& spec, std::int64_t steps, double start,
                    std::uint64_t seed) {
  LimitPath out;
  out.solver = solver;
  out.arms = spec.arms;
  out.seed = seed;
  out.h = (1.0 - start) / static_cast<double>(steps);
  out.times.resize(static_cast<std::size_t>(steps + 1));
  for (std::int64_t i = 0; i <= steps; ++i) out.times[static_cast<std::size_t>(i)] = start + static_cast<double>(i) * out.h;
  out.times.back() = 1.0;
  out.R = GridTable(steps + 1, spec.arms);
  out.noise = GridTable(steps + 1, spec.arms);
  return out;
}

}  // namespace

double BrownianPath::at(int k, double t) const {
  const double x = std::clamp((t - start) / h, 0.0, static_cast<double>(steps));
  auto i = static_cast<std::int64_t>(x);
  if (i >= steps) return path(steps, k);
  const double w = x - static_cast<double>(i);
  return path(i, k) + w * (path(i + 1, k) - path(i, k));
}

BrownianPath brownian_path(int dim, double h, std::uint64_t seed, double start) {
  if (!(h > 0.0)) throw std::invalid_argument("brownian_path requires h > 0");
  if (dim < 1) throw std::invalid_argument("brownian_path requires dim >= 1");
  if (!(start >= 0.0 && start < 1.0)) throw std::invalid_argument("brownian_path start must lie in [0, 1)");
  BrownianPath bp;
  bp.dim = dim;
  bp.start = start;
  bp.seed = seed;
  bp.steps = step_count(1.0 - start, h);
  bp.h = (1.0 - start) / static_cast<double>(bp.steps);
  bp.increments = GridTable(bp.steps, dim);
  bp.path = GridTable(bp.steps + 1, dim);

  Engine rng(seed);
  std::normal_distribution<double> normal;
  const double scale = std::sqrt(bp.h);
  for (std::int64_t i = 0; i < bp.steps; ++i) {
    for (int k = 0; k < dim; ++k) {
      const double dB = scale * normal(rng);
      bp.increments(i, k) = dB;
      bp.path(i + 1, k) = bp.path(i, k) + dB;
    }
  }
  return bp;
}

double LimitPath::occupation(int k, double t) const {
  const auto it = std::upper_bound(times.begin(), times.end(), t + 1e-12);
  const auto j = std::max<std::ptrdiff_t>(0, (it - times.begin()) - 1);
  return R(j, k);
}

LimitPath solve_sde(const BanditSpec& spec, double h, std::uint64_t seed) {
  require_valid(spec);
  require_step(h);
  if (spec.variance_mode != VarianceMode::KNOWN_UNIT)
    throw std::invalid_argument("solve_sde requires KNOWN_UNIT; use solve_sde_variance_start");
  const int K = spec.arms;
  const auto arms = static_cast<std::size_t>(K);
  KernelEvaluator kernel(spec);
  LimitPath out = make_path(LimitSolver::SDE_EM, spec, step_count(1.0, h), 0.0, seed);
  out.brownian = brownian_path(K, out.h, seed);

  std::vector<double> r(arms, 0.0), y(arms, 0.0), p(arms, 0.0);
  for (std::int64_t i = 0; i < out.steps(); ++i) {
    kernel.evaluate(r, y, p);
    for (std::size_t k = 0; k < arms; ++k) {
      const int kk = static_cast<int>(k);
      r[k] += p[k] * out.h;
      y[k] += std::sqrt(p[k]) * out.brownian.increments(i, kk);
      out.R(i + 1, kk) = r[k];
      out.noise(i + 1, kk) = y[k];
    }
  }
  return out;
}

LimitPath solve_random_ode(const BanditSpec& spec, double h, std::uint64_t seed) {
  require_valid(spec);
  require_step(h);
  if (spec.variance_mode != VarianceMode::KNOWN_UNIT)
    throw std::invalid_argument("solve_random_ode requires KNOWN_UNIT variance mode");
  const int K = spec.arms;
  const auto arms = static_cast<std::size_t>(K);
  KernelEvaluator kernel(spec);
  LimitPath out = make_path(LimitSolver::RANDOM_ODE, spec, step_count(1.0, h), 0.0, seed);
  out.brownian = brownian_path(K, out.h, seed);

  std::vector<double> r(arms, 0.0), br(arms, 0.0), p(arms, 0.0);
  for (std::int64_t i = 0; i < out.steps(); ++i) {
    kernel.evaluate(r, br, p);
    for (std::size_t k = 0; k < arms; ++k) {
      const int kk = static_cast<int>(k);
      r[k] += p[k] * out.h;
      br[k] = out.brownian.at(kk, r[k]);
      out.R(i + 1, kk) = r[k];
      out.noise(i + 1, kk) = br[k];
    }
  }
  return out;
}

LimitPath solve_sde_variance_start(const BanditSpec& spec, double h, std::uint64_t seed) {
  require_valid(spec);
  require_step(h);
  if (spec.variance_mode == VarianceMode::KNOWN_UNIT)
    throw std::invalid_argument("solve_sde_variance_start requires ADAPTIVE or MISSPECIFIED_UNIT");
  const double t_eps = spec.burn_in;
  if (!(t_eps > 0.0 && t_eps < 1.0)) throw std::invalid_argument("burn_in must lie in (0, 1)");
  const int K = spec.arms;
  const auto arms = static_cast<std::size_t>(K);
  const bool adaptive = spec.variance_mode == VarianceMode::ADAPTIVE;

  KernelEvaluator kernel(spec);
  LimitPath out = make_path(LimitSolver::SDE_EM, spec, step_count(1.0 - t_eps, h), t_eps, seed);
  out.brownian = brownian_path(K, out.h, substream(seed, 2), t_eps);

  std::vector<double> r(arms), y(arms), scaled(arms), var_scale(arms), sigma(arms), p(arms);
  Engine init_rng(substream(seed, 1));
  std::normal_distribution<double> normal;
  const double root_k = std::sqrt(static_cast<double>(K));
  for (std::size_t k = 0; k < arms; ++k) {
    const int kk = static_cast<int>(k);
    sigma[k] = spec.sd(kk);
    var_scale[k] = adaptive ? sigma[k] * sigma[k] : 1.0;
    r[k] = t_eps / static_cast<double>(K);
    y[k] = std::sqrt(t_eps) * normal(init_rng) / root_k;
    out.R(0, kk) = r[k];
    out.noise(0, kk) = y[k];
  }

  for (std::int64_t i = 0; i < out.steps(); ++i) {
    for (std::size_t k = 0; k < arms; ++k) scaled[k] = sigma[k] * y[k];
    kernel.evaluate_scaled(r, scaled, var_scale, p);
    for (std::size_t k = 0; k < arms; ++k) {
      const int kk = static_cast<int>(k);
      r[k] += p[k] * out.h;
      y[k] += std::sqrt(p[k]) * out.brownian.increments(i, kk);
      out.R(i + 1, kk) = r[k];
      out.noise(i + 1, kk) = y[k];
    }
  }
  return out;
}

double rescaled_regret(const LimitPath& path, const BanditSpec& spec) {
  const auto gaps = spec.rescaled_gaps();
  double regret = 0.0;
  for (int k = 0; k < spec.arms; ++k) regret += gaps[static_cast<std::size_t>(k)] * path.R(path.steps(), k);
  return regret;
}

void write_columnar(std::ostream& out, const LimitPath& path) {
  const bool sde = path.solver == LimitSolver::SDE_EM;
  out << 't';
  for (int k = 1; k <= path.arms; ++k) out << ",R_" << k;
  for (int k = 1; k <= path.arms; ++k) out << (sde ? ",Y_" : ",BR_") << k;
  out << '\n';
  for (std::int64_t j = 0; j <= path.steps(); ++j) {
    std::string line = format_double(path.times[static_cast<std::size_t>(j)]);
    for (int k = 0; k < path.arms; ++k) line += ',' + format_double(path.R(j, k));
    for (int k = 0; k < path.arms; ++k) line += ',' + format_double(path.noise(j, k));
    out << line << '\n';
  }
}

}  // namespace tsdiff

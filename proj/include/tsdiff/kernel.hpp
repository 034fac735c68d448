#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tsdiff/model.hpp"

namespace tsdiff {

// Standard normal CDF and density. Arguments are clamped to +-38 so tail
// probabilities never underflow to exactly zero.
double normal_cdf(double x);
double normal_pdf(double x);

// Per-arm Gaussian posterior in rescaled units (mean scaled by sqrt(n),
// variance by n).
struct PosteriorSummary {
  std::vector<double> means;
  std::vector<double> variances;
};

class QuadratureError : public std::runtime_error {
 public:
  QuadratureError(const std::string& what, double achieved)
      : std::runtime_error(what), achieved_error(achieved) {}
  double achieved_error;
};

// P(N_k > max_{k' != k} N_k') for independent N_k ~ N(mean_k, var_k), by
// adaptive Gauss-Kronrod quadrature of phi_k(x) prod Phi_k'(x). Throws
// QuadratureError when the error estimate exceeds `tolerance`.
std::vector<double> argmax_probabilities(const PosteriorSummary& posterior,
                                         double tolerance = 1e-10);

// Known-variance MAB posterior implied by a kernel point.
PosteriorSummary mab_posterior(const KernelPoint& point, const BanditSpec& spec);

// Closed-form two-arm kernel (Gamma_1, Gamma_2).
std::vector<double> gamma_two_arm(const KernelPoint& point, const BanditSpec& spec);

// K-arm kernel by one-dimensional quadrature.
std::vector<double> gamma_k_arm(const KernelPoint& point, const BanditSpec& spec);

struct LinearMcOptions {
  std::int64_t draws = 100000;  // rounded up to an even count (antithetic pairs)
  std::uint64_t seed = 0x5eed1a9b;
};

// S(u) = b^2 I + sum_k u_k A_k A_k^T.
struct LinearDesign {
  Eigen::MatrixXd S;

  LinearDesign(std::span<const double> u, const BanditSpec& spec);
  double smallest_eigenvalue() const;
};

// Linear-bandit kernel. Closed form for two arms; Monte Carlo over the
// Gaussian posterior of theta for more arms.
std::vector<double> lambda_linear(const KernelPoint& point, const BanditSpec& spec,
                                  const LinearMcOptions& mc = {});

// Two-arm kernel with per-arm noise scales sigma_hat. `point.v` holds
// standardized noise coordinates. ADAPTIVE uses sigma^2 / (b^2 + u) as the
// posterior variance, MISSPECIFIED_UNIT keeps 1 / (b^2 + u).
std::vector<double> gamma_sigma(const KernelPoint& point, const BanditSpec& spec,
                                std::span<const double> sigma_hat);

struct OracleEstimate {
  std::vector<double> probabilities;
  std::vector<double> standard_errors;
  std::vector<std::int64_t> counts;
  std::int64_t draws = 0;
};

// Direct posterior sampling: counts which arm's draw is largest. Uses the
// spec's mode, variance mode and arm_sd. Deterministic given the seed.
OracleEstimate mc_oracle(const KernelPoint& point, const BanditSpec& spec, std::int64_t draws,
                         std::uint64_t seed);

// Allocation-free kernel evaluation for simulation loops. Not thread safe;
// use one instance per worker.
class KernelEvaluator {
 public:
  explicit KernelEvaluator(const BanditSpec& spec, const LinearMcOptions& mc = {});

  int arms() const { return arms_; }

  // Known-variance kernel (Gamma in MAB mode, Lambda in LINEAR mode).
  void evaluate(std::span<const double> u, std::span<const double> v, std::span<double> out);

  // MAB posterior with raw noise coordinates y and per-arm variance
  // multipliers: mean_k = (y_k + u_k g_k) / (b^2 + u_k),
  // var_k = var_scale_k / (b^2 + u_k).
  void evaluate_scaled(std::span<const double> u, std::span<const double> y,
                       std::span<const double> var_scale, std::span<double> out);

 private:
  void linear_two_arm(std::span<const double> u, std::span<const double> v, std::span<double> out);
  void linear_many(std::span<const double> u, std::span<const double> v, std::span<double> out);
  void build_design(std::span<const double> u, std::span<const double> v);

  int arms_;
  BanditMode mode_;
  double b2_;
  std::vector<double> means_;  // rescaled arm means
  PosteriorSummary scratch_;

  // linear mode
  int dim_ = 0;
  Eigen::MatrixXd contexts_;  // d x K
  Eigen::MatrixXd S_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  Eigen::VectorXd rhs_;
  Eigen::VectorXd work_;
  Eigen::MatrixXd normals_;  // d x draws, antithetic pairs
  Eigen::MatrixXd shifted_;
  std::vector<std::int64_t> counts_;
};

}  // namespace tsdiff

#include "tsdiff/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "tsdiff/rng.hpp"

namespace tsdiff {

namespace {

constexpr double kClamp = 38.0;
// phi(10) ~ 7.7e-23, far below every tolerance in use.
constexpr double kQuadratureHalfWidth = 10.0;

void check_point(const KernelPoint& point, int arms) {
  if (point.u.size() != static_cast<std::size_t>(arms) ||
      point.v.size() != static_cast<std::size_t>(arms))
    throw std::invalid_argument("kernel point must have one (u, v) entry per arm");
  for (double u : point.u)
    if (!(u >= 0.0) || !std::isfinite(u))
      throw std::invalid_argument("occupation fractions must be finite and nonnegative");
  for (double v : point.v)
    if (!std::isfinite(v)) throw std::invalid_argument("noise coordinates must be finite");
}

void require_mab(const BanditSpec& spec, const char* op) {
  require_valid(spec);
  if (spec.mode != BanditMode::MAB) throw std::invalid_argument(std::string(op) + " requires MAB mode");
}

// P(N_2 > N_1) for independent normals, with Gamma_1 = 1 - Gamma_2.
inline void two_arm_closed_form(double mean1, double var1, double mean2, double var2,
                                std::span<double> out) {
  const double p2 = normal_cdf((mean2 - mean1) / std::sqrt(var1 + var2));
  out[0] = 1.0 - p2;
  out[1] = p2;
}

}  // namespace

double normal_cdf(double x) {
  x = std::clamp(x, -kClamp, kClamp);
  return 0.5 * std::erfc(-x * std::numbers::sqrt2 / 2.0);
}

double normal_pdf(double x) {
  x = std::clamp(x, -kClamp, kClamp);
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

std::vector<double> argmax_probabilities(const PosteriorSummary& posterior, double tolerance) {
  const std::size_t arms = posterior.means.size();
  if (arms < 2 || posterior.variances.size() != arms)
    throw std::invalid_argument("posterior summary needs matching means and variances for >= 2 arms");
  for (double s2 : posterior.variances)
    if (!(s2 > 0.0)) throw std::invalid_argument("posterior variances must be positive");

  std::vector<double> sd(arms);
  for (std::size_t k = 0; k < arms; ++k) sd[k] = std::sqrt(posterior.variances[k]);

  std::vector<double> out(arms);
  for (std::size_t k = 0; k < arms; ++k) {
    const double mk = posterior.means[k];
    const double sk = sd[k];
    auto integrand = [&](double z) {
      const double x = mk + sk * z;
      double p = normal_pdf(z);
      for (std::size_t j = 0; j < arms && p > 0.0; ++j)
        if (j != k) p *= normal_cdf((x - posterior.means[j]) / sd[j]);
      return p;
    };
    double error = 0.0;
    const double value = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
        integrand, -kQuadratureHalfWidth, kQuadratureHalfWidth, 15, 1e-14, &error);
    if (!(error <= tolerance)) {
      std::ostringstream msg;
      msg << "argmax quadrature did not converge for arm " << k << " (error estimate " << error << ")";
      throw QuadratureError(msg.str(), error);
    }
    out[k] = value;
  }
  return out;
}

PosteriorSummary mab_posterior(const KernelPoint& point, const BanditSpec& spec) {
  require_mab(spec, "mab_posterior");
  check_point(point, spec.arms);
  const auto means = spec.rescaled_means();
  PosteriorSummary post;
  post.means.resize(means.size());
  post.variances.resize(means.size());
  for (std::size_t k = 0; k < means.size(); ++k) {
    const double precision = spec.prior_scale + point.u[k];
    post.means[k] = (point.v[k] + point.u[k] * means[k]) / precision;
    post.variances[k] = 1.0 / precision;
  }
  return post;
}

std::vector<double> gamma_two_arm(const KernelPoint& point, const BanditSpec& spec) {
  require_mab(spec, "gamma_two_arm");
  if (spec.arms != 2) throw std::invalid_argument("gamma_two_arm requires exactly two arms");
  if (spec.variance_mode != VarianceMode::KNOWN_UNIT)
    throw std::invalid_argument("gamma_two_arm requires KNOWN_UNIT variance mode");
  const auto post = mab_posterior(point, spec);
  std::vector<double> out(2);
  two_arm_closed_form(post.means[0], post.variances[0], post.means[1], post.variances[1], out);
  return out;
}

std::vector<double> gamma_k_arm(const KernelPoint& point, const BanditSpec& spec) {
  return argmax_probabilities(mab_posterior(point, spec));
}

LinearDesign::LinearDesign(std::span<const double> u, const BanditSpec& spec) {
  const int d = spec.context_dim();
  S = spec.prior_scale * Eigen::MatrixXd::Identity(d, d);
  for (int k = 0; k < spec.arms; ++k) {
    const Eigen::Map<const Eigen::VectorXd> a(spec.contexts[static_cast<std::size_t>(k)].data(), d);
    S.noalias() += u[static_cast<std::size_t>(k)] * a * a.transpose();
  }
}

double LinearDesign::smallest_eigenvalue() const {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(S, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().minCoeff();
}

std::vector<double> lambda_linear(const KernelPoint& point, const BanditSpec& spec,
                                  const LinearMcOptions& mc) {
  require_valid(spec);
  if (spec.mode != BanditMode::LINEAR) throw std::invalid_argument("lambda_linear requires LINEAR mode");
  check_point(point, spec.arms);
  KernelEvaluator eval(spec, mc);
  std::vector<double> out(static_cast<std::size_t>(spec.arms));
  eval.evaluate(point.u, point.v, out);
  return out;
}

std::vector<double> gamma_sigma(const KernelPoint& point, const BanditSpec& spec,
                                std::span<const double> sigma_hat) {
  require_mab(spec, "gamma_sigma");
  if (spec.arms != 2) throw std::invalid_argument("gamma_sigma requires exactly two arms");
  if (sigma_hat.size() != 2) throw std::invalid_argument("sigma_hat must have two entries");
  for (double s : sigma_hat)
    if (!(s > 0.0) || !std::isfinite(s)) throw std::invalid_argument("sigma_hat must be positive");
  check_point(point, 2);

  const auto means = spec.rescaled_means();
  const bool misspecified = spec.variance_mode == VarianceMode::MISSPECIFIED_UNIT;
  double m[2];
  double s2[2];
  for (int k = 0; k < 2; ++k) {
    const double precision = spec.prior_scale + point.u[k];
    m[k] = (point.v[k] * sigma_hat[k] + point.u[k] * means[k]) / precision;
    s2[k] = (misspecified ? 1.0 : sigma_hat[k] * sigma_hat[k]) / precision;
  }
  std::vector<double> out(2);
  two_arm_closed_form(m[0], s2[0], m[1], s2[1], out);
  return out;
}

OracleEstimate mc_oracle(const KernelPoint& point, const BanditSpec& spec, std::int64_t draws,
                         std::uint64_t seed) {
  require_valid(spec);
  check_point(point, spec.arms);
  if (draws < 1000) throw std::invalid_argument("mc_oracle needs at least 1000 draws");

  const auto arms = static_cast<std::size_t>(spec.arms);
  Engine rng(seed);
  std::normal_distribution<double> normal;
  const auto means = spec.rescaled_means();

  OracleEstimate est;
  est.draws = draws;
  est.counts.assign(arms, 0);
  std::vector<double> score(arms);

  if (spec.mode == BanditMode::MAB) {
    std::vector<double> mean(arms), sd(arms);
    for (std::size_t k = 0; k < arms; ++k) {
      const double precision = spec.prior_scale + point.u[k];
      const double sigma = spec.sd(static_cast<int>(k));
      mean[k] = (sigma * point.v[k] + point.u[k] * means[k]) / precision;
      const double scale = spec.variance_mode == VarianceMode::MISSPECIFIED_UNIT ? 1.0 : sigma * sigma;
      sd[k] = std::sqrt(scale / precision);
    }
    for (std::int64_t i = 0; i < draws; ++i) {
      for (std::size_t k = 0; k < arms; ++k) score[k] = mean[k] + sd[k] * normal(rng);
      ++est.counts[static_cast<std::size_t>(std::max_element(score.begin(), score.end()) - score.begin())];
    }
  } else {
    // theta ~ N(S^-1 g, S^-1) sampled through the eigendecomposition of S.
    const int d = spec.context_dim();
    const LinearDesign design(point.u, spec);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(design.S);
    const Eigen::MatrixXd Q = eig.eigenvectors();
    const Eigen::VectorXd inv_vals = eig.eigenvalues().cwiseInverse();
    Eigen::VectorXd g = Eigen::VectorXd::Zero(d);
    for (std::size_t k = 0; k < arms; ++k) {
      const Eigen::Map<const Eigen::VectorXd> a(spec.contexts[k].data(), d);
      g += a * (point.v[k] + point.u[k] * means[k]);
    }
    const Eigen::VectorXd mean = Q * inv_vals.asDiagonal() * Q.transpose() * g;
    const Eigen::MatrixXd root = Q * inv_vals.cwiseSqrt().asDiagonal();
    Eigen::VectorXd z(d), theta(d);
    for (std::int64_t i = 0; i < draws; ++i) {
      for (int r = 0; r < d; ++r) z[r] = normal(rng);
      theta = mean + root * z;
      for (std::size_t k = 0; k < arms; ++k) {
        const Eigen::Map<const Eigen::VectorXd> a(spec.contexts[k].data(), d);
        score[k] = a.dot(theta);
      }
      ++est.counts[static_cast<std::size_t>(std::max_element(score.begin(), score.end()) - score.begin())];
    }
  }

  est.probabilities.resize(arms);
  est.standard_errors.resize(arms);
  for (std::size_t k = 0; k < arms; ++k) {
    const double p = static_cast<double>(est.counts[k]) / static_cast<double>(draws);
    est.probabilities[k] = p;
    est.standard_errors[k] = std::sqrt(p * (1.0 - p) / static_cast<double>(draws));
  }
  return est;
}

KernelEvaluator::KernelEvaluator(const BanditSpec& spec, const LinearMcOptions& mc)
    : arms_(spec.arms), mode_(spec.mode), b2_(spec.prior_scale), means_(spec.rescaled_means()) {
  require_valid(spec);
  scratch_.means.resize(static_cast<std::size_t>(arms_));
  scratch_.variances.resize(static_cast<std::size_t>(arms_));
  if (mode_ != BanditMode::LINEAR) return;

  dim_ = spec.context_dim();
  contexts_.resize(dim_, arms_);
  for (int k = 0; k < arms_; ++k)
    for (int i = 0; i < dim_; ++i) contexts_(i, k) = spec.contexts[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)];
  for (int j = 0; j < arms_; ++j)
    for (int k = j + 1; k < arms_; ++k)
      if ((contexts_.col(j) - contexts_.col(k)).squaredNorm() == 0.0)
        throw std::invalid_argument("degenerate linear kernel: two arms share the same context");

  S_.resize(dim_, dim_);
  llt_ = Eigen::LLT<Eigen::MatrixXd>(dim_);
  rhs_.resize(dim_);
  work_.resize(dim_);
  if (arms_ > 2) {
    if (mc.draws < 2) throw std::invalid_argument("linear Monte Carlo needs at least two draws");
    const std::int64_t pairs = (mc.draws + 1) / 2;
    normals_.resize(dim_, 2 * pairs);
    Engine rng(mc.seed);
    std::normal_distribution<double> normal;
    for (std::int64_t p = 0; p < pairs; ++p) {
      for (int i = 0; i < dim_; ++i) {
        const double z = normal(rng);
        normals_(i, 2 * p) = z;
        normals_(i, 2 * p + 1) = -z;
      }
    }
    counts_.resize(static_cast<std::size_t>(arms_));
  }
}

void KernelEvaluator::evaluate(std::span<const double> u, std::span<const double> v,
                               std::span<double> out) {
  if (mode_ == BanditMode::LINEAR) {
    if (arms_ == 2) linear_two_arm(u, v, out);
    else linear_many(u, v, out);
    return;
  }
  for (int k = 0; k < arms_; ++k) {
    const auto i = static_cast<std::size_t>(k);
    const double precision = b2_ + u[i];
    scratch_.means[i] = (v[i] + u[i] * means_[i]) / precision;
    scratch_.variances[i] = 1.0 / precision;
  }
  if (arms_ == 2) {
    two_arm_closed_form(scratch_.means[0], scratch_.variances[0], scratch_.means[1],
                        scratch_.variances[1], out);
  } else {
    const auto p = argmax_probabilities(scratch_);
    std::copy(p.begin(), p.end(), out.begin());
  }
}

void KernelEvaluator::evaluate_scaled(std::span<const double> u, std::span<const double> y,
                                      std::span<const double> var_scale, std::span<double> out) {
  if (mode_ != BanditMode::MAB) throw std::logic_error("scaled kernel is defined for MAB mode only");
  for (int k = 0; k < arms_; ++k) {
    const auto i = static_cast<std::size_t>(k);
    const double precision = b2_ + u[i];
    scratch_.means[i] = (y[i] + u[i] * means_[i]) / precision;
    scratch_.variances[i] = var_scale[i] / precision;
  }
  if (arms_ == 2) {
    two_arm_closed_form(scratch_.means[0], scratch_.variances[0], scratch_.means[1],
                        scratch_.variances[1], out);
  } else {
    const auto p = argmax_probabilities(scratch_);
    std::copy(p.begin(), p.end(), out.begin());
  }
}

void KernelEvaluator::build_design(std::span<const double> u, std::span<const double> v) {
  S_.setIdentity();
  S_ *= b2_;
  rhs_.setZero();
  for (int k = 0; k < arms_; ++k) {
    const auto i = static_cast<std::size_t>(k);
    S_.noalias() += u[i] * contexts_.col(k) * contexts_.col(k).transpose();
    rhs_.noalias() += (v[i] + u[i] * means_[i]) * contexts_.col(k);
  }
  llt_.compute(S_);
}

void KernelEvaluator::linear_two_arm(std::span<const double> u, std::span<const double> v,
                                     std::span<double> out) {
  build_design(u, v);
  // With S = L L^T: w^T S^-1 g = (L^-1 w) . (L^-1 g) and w^T S^-1 w = |L^-1 w|^2.
  work_ = contexts_.col(1) - contexts_.col(0);
  llt_.matrixL().solveInPlace(work_);
  llt_.matrixL().solveInPlace(rhs_);
  const double p2 = normal_cdf(work_.dot(rhs_) / work_.norm());
  out[0] = 1.0 - p2;
  out[1] = p2;
}

void KernelEvaluator::linear_many(std::span<const double> u, std::span<const double> v,
                                  std::span<double> out) {
  build_design(u, v);
  llt_.solveInPlace(rhs_);  // posterior mean
  shifted_ = normals_;
  llt_.matrixU().solveInPlace(shifted_);  // columns ~ N(0, S^-1)
  shifted_.colwise() += rhs_;
  const Eigen::MatrixXd scores = contexts_.transpose() * shifted_;
  std::fill(counts_.begin(), counts_.end(), 0);
  for (Eigen::Index c = 0; c < scores.cols(); ++c) {
    Eigen::Index best = 0;
    scores.col(c).maxCoeff(&best);
    ++counts_[static_cast<std::size_t>(best)];
  }
  const auto total = static_cast<double>(scores.cols());
  for (int k = 0; k < arms_; ++k) out[static_cast<std::size_t>(k)] = static_cast<double>(counts_[static_cast<std::size_t>(k)]) / total;
}

}  // namespace tsdiff

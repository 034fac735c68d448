#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "tsdiff/kernel.hpp"

using namespace tsdiff;

namespace {

BanditSpec mab(std::vector<double> gaps, double b2) {
  BanditSpec s;
  s.arms = static_cast<int>(gaps.size());
  s.gaps = std::move(gaps);
  s.prior_scale = b2;
  s.arm_sd.assign(static_cast<std::size_t>(s.arms), 1.0);
  return s;
}

BanditSpec orthonormal_linear(double gap, double b2) {
  BanditSpec s;
  s.arms = 2;
  s.mode = BanditMode::LINEAR;
  s.theta0 = {gap, 0.0};
  s.contexts = {{1.0, 0.0}, {0.0, 1.0}};
  s.prior_scale = b2;
  return s;
}

KernelPoint random_point(std::mt19937_64& rng, int arms) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::uniform_real_distribution<double> v3(-3.0, 3.0);
  KernelPoint p;
  for (int k = 0; k < arms; ++k) {
    p.u.push_back(u01(rng) / arms);
    p.v.push_back(v3(rng));
  }
  return p;
}

// Posterior means and variances written out directly from (u, v, gaps).
void posterior(const KernelPoint& p, const std::vector<double>& gaps, double b2, std::vector<double>& m,
               std::vector<double>& s2) {
  double top = 0.0;
  for (double g : gaps) top = std::max(top, g);
  m.clear();
  s2.clear();
  for (std::size_t k = 0; k < gaps.size(); ++k) {
    m.push_back((p.v[k] + p.u[k] * (top - gaps[k])) / (b2 + p.u[k]));
    s2.push_back(1.0 / (b2 + p.u[k]));
  }
}

}  // namespace

TEST_CASE("normal cdf reference values and tails") {
  CHECK(normal_cdf(0.0) == 0.5);
  CHECK(normal_cdf(1.96) == doctest::Approx(0.9750021048517795).epsilon(1e-15));
  CHECK(normal_cdf(-1.0) == doctest::Approx(0.15865525393145707).epsilon(1e-15));
  CHECK(normal_cdf(-50.0) > 0.0);
  CHECK(normal_cdf(-50.0) == normal_cdf(-38.0));
  CHECK(normal_pdf(0.0) == doctest::Approx(0.3989422804014327).epsilon(1e-15));
}

TEST_CASE("two-arm kernel at the origin is one half") {
  for (double gap : {0.0, 1.0, 7.5})
    for (double b2 : {0.1, 1.0, 3.0}) {
      const auto g = gamma_two_arm({{0, 0}, {0, 0}}, mab({0, gap}, b2));
      CHECK(g[1] == 0.5);
      CHECK(g[0] == 0.5);
    }
}

TEST_CASE("two-arm kernel with symmetric arms is one half") {
  const auto g = gamma_two_arm({{0.3, 0.3}, {0.7, 0.7}}, mab({0, 0}, 1.0));
  CHECK(g[1] == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("two-arm kernel agrees with direct sampling") {
  const KernelPoint p{{0.5, 0.5}, {0.0, 0.0}};
  const auto g = gamma_two_arm(p, mab({0, 1}, 0.1));
  std::vector<double> m, s2;
  posterior(p, {0, 1}, 0.1, m, s2);
  const auto est = oracle::two_normal_race(m[0], s2[0], m[1], s2[1], 1000000, 11);
  CHECK(std::abs(g[1] - est.p) <= 3.0 * est.se);
  // The explicit formula.
  const double arg = (0.0 / 0.6 - 0.0 / 0.6 - 0.5 * 1.0 / 0.6) / std::sqrt(1.0 / 0.6 + 1.0 / 0.6);
  CHECK(g[1] == doctest::Approx(normal_cdf(arg)).epsilon(1e-14));
}

TEST_CASE("two-arm kernel rejects other arm counts") {
  CHECK_THROWS_AS(gamma_two_arm({{0, 0, 0}, {0, 0, 0}}, mab({0, 1, 2}, 1.0)), std::invalid_argument);
}

TEST_CASE("k-arm kernel with exchangeable arms") {
  const auto g = gamma_k_arm({{0, 0, 0}, {0, 0, 0}}, mab({0, 0, 0}, 1.0));
  for (double x : g) CHECK(x == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("k-arm quadrature reduces to the closed form for two arms") {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 50; ++i) {
    const auto p = random_point(rng, 2);
    const auto spec = mab({0, std::uniform_real_distribution<double>(0, 3)(rng)}, 0.5);
    const auto closed = gamma_two_arm(p, spec);
    const auto quad = gamma_k_arm(p, spec);
    CHECK(std::abs(closed[1] - quad[1]) <= 1e-10);
    CHECK(std::abs(closed[0] - quad[0]) <= 1e-10);
  }
}

TEST_CASE("four-arm kernel agrees with direct sampling") {
  std::mt19937_64 rng(5);
  const std::vector<double> gaps{0, 0.4, 1.1, 2.0};
  const auto p = random_point(rng, 4);
  const auto g = gamma_k_arm(p, mab(gaps, 0.7));
  std::vector<double> m, s2;
  posterior(p, gaps, 0.7, m, s2);
  const auto est = oracle::normal_argmax(m, s2, 1000000, 19);
  for (std::size_t k = 0; k < 4; ++k) CHECK(std::abs(g[k] - est[k].p) <= 3.0 * est[k].se + 1e-12);
}

TEST_CASE("quadrature failure carries the achieved error") {
  PosteriorSummary post{{0.3, -0.2, 0.1}, {0.5, 1.0, 2.0}};
  try {
    argmax_probabilities(post, 0.0);
    // Exact zero error estimates are legitimate; nothing else to check then.
  } catch (const QuadratureError& e) {
    CHECK(e.achieved_error > 0.0);
  }
  CHECK_NOTHROW(argmax_probabilities(post));
}

TEST_CASE("kernel outputs are normalized and strictly inside (0, 1)") {
  std::mt19937_64 rng(7);
  for (int K : {2, 3, 5}) {
    std::vector<double> gaps(static_cast<std::size_t>(K));
    for (int k = 1; k < K; ++k) gaps[static_cast<std::size_t>(k)] = 0.5 * k;
    const auto spec = mab(gaps, 1.0);
    for (int i = 0; i < 100; ++i) {
      const auto g = gamma_k_arm(random_point(rng, K), spec);
      double sum = 0.0;
      for (double x : g) {
        CHECK(x > 0.0);
        CHECK(x < 1.0);
        sum += x;
      }
      CHECK(std::abs(sum - 1.0) <= 1e-10);
    }
  }
}

TEST_CASE("two-arm kernel monotonicity by finite differences") {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> gap_dist(0.0, 3.0);
  const double h = 1e-4;
  for (int i = 0; i < 100; ++i) {
    auto p = random_point(rng, 2);
    // Keep the normal argument moderate so differences are resolvable.
    p.v[0] = std::clamp(p.v[0], -1.0, 1.0);
    p.v[1] = std::clamp(p.v[1], -1.0, 1.0);
    const double gap = gap_dist(rng);
    const auto base = gamma_two_arm(p, mab({0, gap}, 1.0))[1];

    auto up = p;
    up.v[1] += h;
    CHECK(gamma_two_arm(up, mab({0, gap}, 1.0))[1] > base);
    auto down = p;
    down.v[0] += h;
    CHECK(gamma_two_arm(down, mab({0, gap}, 1.0))[1] < base);
    if (p.u[0] > 0.0) CHECK(gamma_two_arm(p, mab({0, gap + h}, 1.0))[1] < base);
  }
}

TEST_CASE("two-arm kernel gradients stay bounded") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::uniform_real_distribution<double> v3(-3.0, 3.0);
  const auto spec = mab({0, 1.0}, 1.0);
  const double h = 1e-6;
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    KernelPoint p{{u01(rng), u01(rng)}, {v3(rng), v3(rng)}};
    double norm2 = 0.0;
    for (int c = 0; c < 4; ++c) {
      auto a = p, b = p;
      double& xa = c < 2 ? a.u[static_cast<std::size_t>(c)] : a.v[static_cast<std::size_t>(c - 2)];
      double& xb = c < 2 ? b.u[static_cast<std::size_t>(c)] : b.v[static_cast<std::size_t>(c - 2)];
      xa += h;
      xb = std::max(0.0, xb - h);
      const double width = xa - xb;
      const double d = (gamma_two_arm(a, spec)[1] - gamma_two_arm(b, spec)[1]) / width;
      norm2 += d * d;
    }
    worst = std::max(worst, std::sqrt(norm2));
  }
  // With b2 = 1 and |v| <= 3 each partial is below phi(0) * 5 ~ 2.
  CHECK(std::isfinite(worst));
  CHECK(worst < 5.0);
}

TEST_CASE("closed form, quadrature and sampling agree") {
  std::mt19937_64 rng(23);
  for (int i = 0; i < 10; ++i) {
    auto p = random_point(rng, 2);
    // Away from the tails, so the sampler's standard error is informative.
    p.v[0] /= 3.0;
    p.v[1] /= 3.0;
    const auto spec = mab({0, 1.5}, 0.8);
    const auto closed = gamma_two_arm(p, spec);
    const auto quad = gamma_k_arm(p, spec);
    const auto mc = mc_oracle(p, spec, 100000, 100 + static_cast<std::uint64_t>(i));
    CHECK(std::abs(closed[1] - quad[1]) <= 1e-10);
    CHECK(std::abs(closed[1] - mc.probabilities[1]) <= std::max(1e-10, 3.0 * mc.standard_errors[1]));
  }
}

TEST_CASE("linear kernel at the origin is one half") {
  BanditSpec s;
  s.arms = 2;
  s.mode = BanditMode::LINEAR;
  s.theta0 = {0.3, -1.0, 2.0};
  s.contexts = {{1.0, 2.0, 0.0}, {0.0, 1.0, -1.0}};
  s.prior_scale = 0.4;
  const auto l = lambda_linear({{0, 0}, {0, 0}}, s);
  CHECK(l[1] == 0.5);
}

TEST_CASE("linear kernel agrees with an independent posterior sampler") {
  const auto spec = orthonormal_linear(1.0, 0.1);
  const KernelPoint p{{0.5, 0.5}, {0.0, 0.0}};
  const auto l = lambda_linear(p, spec);
  const auto est = oracle::linear_argmax(spec.contexts, spec.theta0, 0.1, p.u, p.v, 1000000, 29);
  CHECK(std::abs(l[1] - est[1].p) <= 3.0 * est[1].se);

  BanditSpec skew;
  skew.arms = 2;
  skew.mode = BanditMode::LINEAR;
  skew.theta0 = {0.5, 1.0};
  skew.contexts = {{1.0, 0.5}, {-0.3, 1.2}};
  skew.prior_scale = 0.6;
  const KernelPoint q{{0.2, 0.6}, {0.4, -0.7}};
  const auto lq = lambda_linear(q, skew);
  const auto eq = oracle::linear_argmax(skew.contexts, skew.theta0, 0.6, q.u, q.v, 1000000, 31);
  CHECK(std::abs(lq[1] - eq[1].p) <= 3.0 * eq[1].se);
}

TEST_CASE("orthonormal contexts reduce the linear kernel to the bandit kernel") {
  std::mt19937_64 rng(37);
  for (int i = 0; i < 100; ++i) {
    const auto p = random_point(rng, 2);
    const double gap = std::uniform_real_distribution<double>(0, 3)(rng);
    const double b2 = std::uniform_real_distribution<double>(0.1, 2)(rng);
    const auto l = lambda_linear(p, orthonormal_linear(gap, b2));
    const auto g = gamma_two_arm(p, mab({0, gap}, b2));
    CHECK(std::abs(l[1] - g[1]) <= 1e-12);
  }
}

TEST_CASE("linear kernel rejects identical contexts") {
  BanditSpec s = orthonormal_linear(1.0, 1.0);
  s.contexts = {{1.0, 0.0}, {1.0, 0.0}};
  CHECK_THROWS_AS(lambda_linear({{0.1, 0.1}, {0, 0}}, s), std::invalid_argument);
}

TEST_CASE("linear kernel with more arms by Monte Carlo") {
  BanditSpec s;
  s.arms = 3;
  s.mode = BanditMode::LINEAR;
  s.theta0 = {1.0, 0.2};
  s.contexts = {{1.0, 0.0}, {0.0, 1.0}, {0.6, 0.6}};
  s.prior_scale = 0.5;
  const KernelPoint p{{0.2, 0.3, 0.1}, {0.1, -0.2, 0.3}};
  const auto l = lambda_linear(p, s);
  double sum = 0.0;
  for (double x : l) sum += x;
  CHECK(std::abs(sum - 1.0) <= 1e-10);
  const auto est = oracle::linear_argmax(s.contexts, s.theta0, 0.5, p.u, p.v, 400000, 41);
  // Both sides are Monte Carlo: 1e5 antithetic draws against 4e5 plain draws.
  for (std::size_t k = 0; k < 3; ++k) {
    const double se = std::sqrt(est[k].se * est[k].se + est[k].p * (1 - est[k].p) / 100000.0);
    CHECK(std::abs(l[k] - est[k].p) <= 4.0 * se);
  }
  CHECK(lambda_linear(p, s) == l);
}

TEST_CASE("design matrix is symmetric with eigenvalues at least b2") {
  BanditSpec s;
  s.arms = 3;
  s.mode = BanditMode::LINEAR;
  s.theta0 = {1.0, 0.2, 0.0};
  s.contexts = {{1.0, 0.0, 2.0}, {0.0, 1.0, 0.0}, {0.6, 0.6, -1.0}};
  s.prior_scale = 0.3;
  const std::vector<double> u{0.2, 0.5, 0.3};
  const LinearDesign design(u, s);
  CHECK((design.S - design.S.transpose()).norm() == 0.0);
  CHECK(design.smallest_eigenvalue() >= 0.3 - 1e-12);
}

TEST_CASE("variance-aware kernel with unit noise is the base kernel") {
  std::mt19937_64 rng(43);
  auto adaptive = mab({0, 1.3}, 0.9);
  adaptive.variance_mode = VarianceMode::ADAPTIVE;
  adaptive.burn_in = 0.05;
  const std::vector<double> ones{1.0, 1.0};
  for (int i = 0; i < 100; ++i) {
    const auto p = random_point(rng, 2);
    const auto a = gamma_sigma(p, adaptive, ones);
    const auto g = gamma_two_arm(p, mab({0, 1.3}, 0.9));
    CHECK(std::abs(a[1] - g[1]) <= 1e-12);
  }
  CHECK(gamma_sigma({{0, 0}, {0, 0}}, adaptive, std::vector<double>{0.3, 4.0})[1] == 0.5);
  CHECK_THROWS_AS(gamma_sigma({{0, 0}, {0, 0}}, adaptive, std::vector<double>{0.0, 1.0}), std::invalid_argument);
}

TEST_CASE("adaptive and misspecified kernels differ and match their samplers") {
  const KernelPoint p{{0.3, 0.3}, {0.1, -0.2}};
  const std::vector<double> sigma{1.0, 2.0};
  auto adaptive = mab({0, 1.0}, 1.0);
  adaptive.variance_mode = VarianceMode::ADAPTIVE;
  adaptive.burn_in = 0.05;
  adaptive.arm_sd = sigma;
  auto misspecified = adaptive;
  misspecified.variance_mode = VarianceMode::MISSPECIFIED_UNIT;

  const double ga = gamma_sigma(p, adaptive, sigma)[1];
  const double gm = gamma_sigma(p, misspecified, sigma)[1];
  CHECK(std::abs(ga - gm) > 0.01);

  const double prec = 1.3;
  const double m1 = (0.1 * 1.0 + 0.3 * 1.0) / prec;
  const double m2 = (-0.2 * 2.0) / prec;
  const auto ea = oracle::two_normal_race(m1, 1.0 / prec, m2, 4.0 / prec, 1000000, 47);
  const auto em = oracle::two_normal_race(m1, 1.0 / prec, m2, 1.0 / prec, 1000000, 53);
  CHECK(std::abs(ga - ea.p) <= 3.0 * ea.se);
  CHECK(std::abs(gm - em.p) <= 3.0 * em.se);
}

TEST_CASE("library sampler: exchangeable point, counting identity, determinism") {
  const auto spec = mab({0, 0}, 1.0);
  const KernelPoint p{{0.2, 0.2}, {0.1, 0.1}};
  const auto est = mc_oracle(p, spec, 1000000, 59);
  CHECK(std::abs(est.probabilities[1] - 0.5) <= 3.0 * est.standard_errors[1]);
  CHECK(est.counts[0] + est.counts[1] == est.draws);

  const auto spec3 = mab({0, 0.5, 1.0}, 1.0);
  const KernelPoint q{{0.1, 0.2, 0.3}, {0.1, -0.1, 0.4}};
  const auto a = mc_oracle(q, spec3, 5000, 61);
  const auto b = mc_oracle(q, spec3, 5000, 61);
  CHECK(a.counts == b.counts);
  CHECK(a.probabilities == b.probabilities);
  std::int64_t total = 0;
  for (auto c : a.counts) total += c;
  CHECK(total == 5000);
  CHECK_THROWS(mc_oracle(q, spec3, 999, 1));
}

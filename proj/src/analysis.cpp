#include "tsdiff/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <stdexcept>

#include "tsdiff/format.hpp"
#include "tsdiff/rng.hpp"

namespace tsdiff {

EmpiricalDistribution::EmpiricalDistribution(std::vector<double> sample, Provenance provenance)
    : sorted_(std::move(sample)), provenance_(std::move(provenance)) {
  if (sorted_.size() < 2) throw std::invalid_argument("empirical distribution needs at least two values");
  for (double x : sorted_)
    if (std::isnan(x)) throw std::invalid_argument("empirical distribution contains NaN");
  std::sort(sorted_.begin(), sorted_.end());
}

double EmpiricalDistribution::mean() const {
  return std::accumulate(sorted_.begin(), sorted_.end(), 0.0) / static_cast<double>(sorted_.size());
}

double EmpiricalDistribution::sd() const {
  const double mu = mean();
  double ss = 0.0;
  for (double x : sorted_) ss += (x - mu) * (x - mu);
  return std::sqrt(ss / static_cast<double>(sorted_.size() - 1));
}

void EmpiricalDistribution::write(std::ostream& out) const { write_sample(out, sorted_, provenance_); }

EmpiricalDistribution EmpiricalDistribution::read(std::istream& in) {
  Provenance prov;
  std::vector<double> values = read_sample(in, prov);
  return EmpiricalDistribution(std::move(values), std::move(prov));
}

double nearest_rank(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw std::invalid_argument("quantile of an empty sample");
  if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("quantile level must lie in [0, 1]");
  const auto n = static_cast<double>(sorted.size());
  auto rank = static_cast<std::size_t>(std::ceil(q * n - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, sorted.size());
  return sorted[rank - 1];
}

void write_sample(std::ostream& out, std::span<const double> sorted, const Provenance& provenance) {
  out << "# tsdiff empirical distribution\n";
  out << "# spec_hash: " << provenance.spec_hash << '\n';
  out << "# source: " << provenance.source << '\n';
  out << "# master_seed: " << provenance.master_seed << '\n';
  out << "# count: " << sorted.size() << '\n';
  for (double x : sorted) out << format_double(x) << '\n';
}

std::vector<double> read_sample(std::istream& in, Provenance& prov) {
  std::vector<double> values;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto colon = line.find(':');
      if (colon == std::string::npos) continue;
      std::string key = line.substr(1, colon - 1);
      key.erase(0, key.find_first_not_of(' '));
      std::string value = line.substr(colon + 1);
      value.erase(0, value.find_first_not_of(' '));
      if (key == "spec_hash") prov.spec_hash = value;
      else if (key == "source") prov.source = value;
      else if (key == "master_seed") prov.master_seed = std::strtoull(value.c_str(), nullptr, 10);
      continue;
    }
    char* end = nullptr;
    const double x = std::strtod(line.c_str(), &end);
    if (end == line.c_str()) throw std::runtime_error("malformed distribution value: " + line);
    values.push_back(x);
  }
  std::sort(values.begin(), values.end());
  return values;
}

double ks_statistic(const EmpiricalDistribution& a, const EmpiricalDistribution& b) {
  const auto& xa = a.sorted();
  const auto& xb = b.sorted();
  const auto na = static_cast<double>(xa.size());
  const auto nb = static_cast<double>(xb.size());
  std::size_t i = 0;
  std::size_t j = 0;
  double d = 0.0;
  while (i < xa.size() && j < xb.size()) {
    const double x = std::min(xa[i], xb[j]);
    while (i < xa.size() && xa[i] <= x) ++i;
    while (j < xb.size() && xb[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

KsVerdict ks_two_sample(const EmpiricalDistribution& a, const EmpiricalDistribution& b,
                        double threshold) {
  KsVerdict v;
  v.statistic = ks_statistic(a, b);
  v.threshold = threshold;
  v.pass = v.statistic < threshold;
  return v;
}

double StepApproximation::operator()(double t) const {
  const auto it = std::upper_bound(jump_times.begin(), jump_times.end(), t);
  if (it == jump_times.begin()) return values.front();
  return values[static_cast<std::size_t>(it - jump_times.begin()) - 1];
}

StepApproximation chi_epsilon(const GridPath& path, double epsilon, std::uint64_t seed,
                              const ChiOptions& options) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("chi_epsilon requires epsilon > 0");
  if (path.times.empty() || path.times.size() != path.values.size())
    throw std::invalid_argument("chi_epsilon needs a non-empty path with matching times and values");

  Engine rng(seed);
  std::uniform_real_distribution<double> unif(0.5, 1.0);
  auto draw = [&] { return options.fixed_uniform ? *options.fixed_uniform : unif(rng); };

  StepApproximation out;
  out.epsilon = epsilon;
  double anchor = path.values.front();
  out.jump_times.push_back(path.times.front());
  out.values.push_back(anchor);
  out.grid_index.push_back(0);
  double u = draw();
  out.uniforms.push_back(u);

  // A relative slack of 1e-12 absorbs rounding in grid values; points that do
  // not trigger still satisfy |z - anchor| < eps.
  constexpr double kSlack = 1.0 - 1e-12;
  for (std::size_t i = 1; i < path.size(); ++i) {
    const double left = path.values[i - 1];  // z(t_i-) of the step path
    const double dist = std::max(std::abs(path.values[i] - anchor), std::abs(left - anchor));
    if (dist >= epsilon * u * kSlack) {
      anchor = path.values[i];
      out.jump_times.push_back(path.times[i]);
      out.values.push_back(anchor);
      out.grid_index.push_back(i);
      u = draw();
      out.uniforms.push_back(u);
    }
  }
  return out;
}

GridPath approx_stochastic_integral(const GridPath& z1, const GridPath& z2, double epsilon,
                                    std::uint64_t seed, const ChiOptions& options) {
  if (z1.times != z2.times) throw std::invalid_argument("integrand and integrator must share a grid");
  const StepApproximation chi = chi_epsilon(z1, epsilon, seed, options);

  GridPath out;
  out.times = z2.times;
  out.values.assign(z2.size(), 0.0);
  double settled = 0.0;  // integral up to the current segment start
  std::size_t seg = 0;
  for (std::size_t i = 0; i < z2.size(); ++i) {
    while (seg + 1 < chi.grid_index.size() && chi.grid_index[seg + 1] <= i) {
      const std::size_t s0 = chi.grid_index[seg];
      const std::size_t s1 = chi.grid_index[seg + 1];
      settled += chi.values[seg] * (z2.values[s1] - z2.values[s0]);
      ++seg;
    }
    const std::size_t s0 = chi.grid_index[seg];
    out.values[i] = settled + chi.values[seg] * (z2.values[i] - z2.values[s0]);
  }
  return out;
}

double quadratic_variation(std::span<const double> values) {
  double qv = 0.0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    const double d = values[i] - values[i - 1];
    qv += d * d;
  }
  return qv;
}

GridPath time_change_extract(const LimitPath& limit, int k, std::int64_t points) {
  if (limit.solver != LimitSolver::SDE_EM) throw std::invalid_argument("time change needs an SDE_EM path");
  if (k < 0 || k >= limit.arms) throw std::invalid_argument("arm index out of range");
  if (limit.times.empty() || limit.times.front() != 0.0)
    throw std::invalid_argument("time change needs a path started at t = 0");
  const std::vector<double> r = limit.R.column(k);
  for (std::size_t i = 1; i < r.size(); ++i)
    if (!(r[i] > r[i - 1])) throw std::invalid_argument("occupation path is not strictly increasing");

  const std::int64_t count = points > 0 ? points : static_cast<std::int64_t>(r.size());
  if (count < 2) throw std::invalid_argument("time change needs at least two output points");
  const double end = r.back();
  GridPath out;
  out.times.resize(static_cast<std::size_t>(count));
  out.values.resize(static_cast<std::size_t>(count));
  for (std::int64_t j = 0; j < count; ++j) {
    const double s = j + 1 == count ? end : end * static_cast<double>(j) / static_cast<double>(count - 1);
    const auto idx = static_cast<std::size_t>(std::lower_bound(r.begin(), r.end(), s) - r.begin());
    out.times[static_cast<std::size_t>(j)] = s;
    out.values[static_cast<std::size_t>(j)] = limit.noise(static_cast<std::int64_t>(std::min(idx, r.size() - 1)), k);
  }
  return out;
}

}  // namespace tsdiff

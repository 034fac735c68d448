#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tsdiff/limit.hpp"
#include "tsdiff/paths.hpp"

namespace tsdiff {

struct Provenance {
  std::string spec_hash;
  std::string source;  // solver or view label
  std::uint64_t master_seed = 0;
};

// Nearest-rank quantile of an ascending sample: the ceil(q * size)-th value.
double nearest_rank(std::span<const double> sorted, double q);

// One-column text format: "# key: value" provenance lines, then one value per
// line. Also used for single-replication runs that cannot form an
// EmpiricalDistribution.
void write_sample(std::ostream& out, std::span<const double> sorted, const Provenance& provenance);
std::vector<double> read_sample(std::istream& in, Provenance& provenance);

// Sorted sample of a scalar functional over replications.
class EmpiricalDistribution {
 public:
  EmpiricalDistribution(std::vector<double> sample, Provenance provenance = {});

  const std::vector<double>& sorted() const { return sorted_; }
  std::size_t count() const { return sorted_.size(); }
  const Provenance& provenance() const { return provenance_; }

  double mean() const;
  double sd() const;
  double quantile(double q) const { return nearest_rank(sorted_, q); }

  void write(std::ostream& out) const;
  static EmpiricalDistribution read(std::istream& in);

 private:
  std::vector<double> sorted_;
  Provenance provenance_;
};

struct KsVerdict {
  double statistic = 0.0;
  double threshold = 0.0;
  bool pass = false;  // statistic < threshold
};

double ks_statistic(const EmpiricalDistribution& a, const EmpiricalDistribution& b);
KsVerdict ks_two_sample(const EmpiricalDistribution& a, const EmpiricalDistribution& b,
                        double threshold);

// Piecewise-constant, right-continuous approximation chi_eps(z).
struct StepApproximation {
  std::vector<double> jump_times;  // tau_0 = start of the path < tau_1 < ...
  std::vector<double> values;      // z(tau_j)
  std::vector<double> uniforms;    // U_j drawn for tau_j, j >= 1 (plus the pending draw)
  std::vector<std::size_t> grid_index;  // position of tau_j on the source grid
  double epsilon = 0.0;

  double operator()(double t) const;
  std::size_t jumps() const { return jump_times.empty() ? 0 : jump_times.size() - 1; }
};

struct ChiOptions {
  // Test hook: pin every U_j to this value instead of drawing Unif[1/2, 1].
  std::optional<double> fixed_uniform;
};

// Randomized epsilon-step approximation of a grid path. Hitting times are
// resolved at grid resolution; sup |z - chi_eps(z)| <= eps holds exactly.
StepApproximation chi_epsilon(const GridPath& path, double epsilon, std::uint64_t seed,
                              const ChiOptions& options = {});

// F_eps(z1, z2)(t) = int_0^t chi_eps(z1) dz2 with the step-function integral
// sum_j chi(s_j) (z2(s_{j+1} ^ t) - z2(s_j)), evaluated on z2's grid.
GridPath approx_stochastic_integral(const GridPath& z1, const GridPath& z2, double epsilon,
                                    std::uint64_t seed, const ChiOptions& options = {});

double quadratic_variation(std::span<const double> values);
inline double quadratic_variation(const GridPath& path) { return quadratic_variation(path.values); }

// Y_k o R_k^-1 on `points` uniform times over [0, R_k(1)], with
// R_k^-1(s) = inf{t : R_k(t) >= s} resolved on the solver grid. points = 0
// uses one point per solver grid time.
GridPath time_change_extract(const LimitPath& limit, int k, std::int64_t points = 0);

}  // namespace tsdiff

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace tsdiff {

enum class BanditMode { MAB, LINEAR };

enum class VarianceMode { KNOWN_UNIT, ADAPTIVE, MISSPECIFIED_UNIT };

std::string to_string(BanditMode mode);
std::string to_string(VarianceMode mode);
BanditMode parse_bandit_mode(const std::string& text);
VarianceMode parse_variance_mode(const std::string& text);

// Problem definition in diffusion-scaled units.
//
// MAB mode stores the sqrt(n)-rescaled gap of every arm below the best arm.
// The raw mean of arm k at horizon n is (max_gap - gap_k) / sqrt(n), so the
// worst arm sits at 0. LINEAR mode stores theta0 = sqrt(n) * theta and one
// context vector per arm. Prior means are always zero and the prior variance
// is 1 / (prior_scale * n) per coordinate.
struct BanditSpec {
  int arms = 2;
  BanditMode mode = BanditMode::MAB;
  std::vector<double> gaps;
  std::vector<double> theta0;
  std::vector<std::vector<double>> contexts;
  double prior_scale = 1.0;
  std::vector<double> arm_sd;
  VarianceMode variance_mode = VarianceMode::KNOWN_UNIT;
  double burn_in = 0.0;

  // Rescaled mean sqrt(n) * mu_k of every arm.
  std::vector<double> rescaled_means() const;
  // Best rescaled mean minus each arm's rescaled mean (all >= 0).
  std::vector<double> rescaled_gaps() const;
  int context_dim() const;
  double sd(int k) const;

  // Two-arm MAB instance with gaps (0, gap).
  static BanditSpec two_arm(double gap, double prior_scale);
};

struct HorizonSpec {
  std::int64_t n = 1;
  std::int64_t batch_size = 1;

  double t(std::int64_t j) const { return static_cast<double>(j) / static_cast<double>(n); }
};

// Argument of the sampling kernels: occupation fractions u and rescaled noise
// coordinates v.
struct KernelPoint {
  std::vector<double> u;
  std::vector<double> v;
};

// Every violated invariant, human readable. Empty means valid.
std::vector<std::string> validate_spec(const BanditSpec& spec, const HorizonSpec& horizon);

// Throws std::invalid_argument listing every violation.
void require_valid(const BanditSpec& spec, const HorizonSpec& horizon);

// Horizon-independent checks only (used by the limit solvers).
std::vector<std::string> validate_spec(const BanditSpec& spec);
void require_valid(const BanditSpec& spec);

void to_json(nlohmann::json& j, const BanditSpec& spec);
void from_json(const nlohmann::json& j, BanditSpec& spec);
void to_json(nlohmann::json& j, const HorizonSpec& horizon);
void from_json(const nlohmann::json& j, HorizonSpec& horizon);

// FNV-1a over the canonical JSON serialization.
std::uint64_t spec_hash(const BanditSpec& spec);
std::string spec_hash_hex(const BanditSpec& spec);

}  // namespace tsdiff

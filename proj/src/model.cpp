#include "tsdiff/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace tsdiff {

std::string to_string(BanditMode mode) { return mode == BanditMode::MAB ? "MAB" : "LINEAR"; }

std::string to_string(VarianceMode mode) {
  switch (mode) {
    case VarianceMode::KNOWN_UNIT: return "KNOWN_UNIT";
    case VarianceMode::ADAPTIVE: return "ADAPTIVE";
    case VarianceMode::MISSPECIFIED_UNIT: return "MISSPECIFIED_UNIT";
  }
  return "?";
}

BanditMode parse_bandit_mode(const std::string& text) {
  if (text == "MAB") return BanditMode::MAB;
  if (text == "LINEAR") return BanditMode::LINEAR;
  throw std::invalid_argument("unknown bandit mode: " + text);
}

VarianceMode parse_variance_mode(const std::string& text) {
  if (text == "KNOWN_UNIT") return VarianceMode::KNOWN_UNIT;
  if (text == "ADAPTIVE") return VarianceMode::ADAPTIVE;
  if (text == "MISSPECIFIED_UNIT") return VarianceMode::MISSPECIFIED_UNIT;
  throw std::invalid_argument("unknown variance mode: " + text);
}

std::vector<double> BanditSpec::rescaled_means() const {
  std::vector<double> means(static_cast<std::size_t>(arms), 0.0);
  if (mode == BanditMode::MAB) {
    const double top = gaps.empty() ? 0.0 : *std::max_element(gaps.begin(), gaps.end());
    for (std::size_t k = 0; k < means.size() && k < gaps.size(); ++k) means[k] = top - gaps[k];
  } else {
    for (std::size_t k = 0; k < means.size() && k < contexts.size(); ++k) {
      double dot = 0.0;
      for (std::size_t i = 0; i < contexts[k].size() && i < theta0.size(); ++i)
        dot += contexts[k][i] * theta0[i];
      means[k] = dot;
    }
  }
  return means;
}

std::vector<double> BanditSpec::rescaled_gaps() const {
  auto means = rescaled_means();
  const double best = means.empty() ? 0.0 : *std::max_element(means.begin(), means.end());
  for (auto& m : means) m = best - m;
  return means;
}

int BanditSpec::context_dim() const {
  return contexts.empty() ? 0 : static_cast<int>(contexts.front().size());
}

double BanditSpec::sd(int k) const {
  return arm_sd.empty() ? 1.0 : arm_sd[static_cast<std::size_t>(k)];
}

BanditSpec BanditSpec::two_arm(double gap, double prior_scale) {
  BanditSpec spec;
  spec.arms = 2;
  spec.gaps = {0.0, gap};
  spec.prior_scale = prior_scale;
  spec.arm_sd = {1.0, 1.0};
  return spec;
}

std::vector<std::string> validate_spec(const BanditSpec& spec) {
  std::vector<std::string> out;
  const auto arms = static_cast<std::size_t>(std::max(spec.arms, 0));
  if (spec.arms < 2) out.emplace_back("at least two arms required");

  if (spec.mode == BanditMode::MAB) {
    if (spec.gaps.size() != arms) {
      out.emplace_back("gaps must have one entry per arm");
    } else if (!spec.gaps.empty()) {
      bool finite = true;
      for (double g : spec.gaps) {
        if (!std::isfinite(g)) finite = false;
        else if (g < 0.0) out.emplace_back("negative gap");
      }
      if (!finite) out.emplace_back("non-finite gap");
      else if (*std::min_element(spec.gaps.begin(), spec.gaps.end()) != 0.0)
        out.emplace_back("no optimal arm: min gap ≠ 0");
    }
  } else {
    if (spec.contexts.size() != arms) out.emplace_back("contexts must have one vector per arm");
    if (!spec.contexts.empty()) {
      const auto d = spec.contexts.front().size();
      bool mismatch = false;
      for (const auto& a : spec.contexts) mismatch = mismatch || a.size() != d;
      if (mismatch) out.emplace_back("context dimension mismatch");
      else if (d == 0) out.emplace_back("contexts must be non-empty vectors");
      else if (spec.theta0.size() != d) out.emplace_back("theta0 dimension differs from contexts");
    }
    if (spec.variance_mode != VarianceMode::KNOWN_UNIT)
      out.emplace_back("variance estimation is supported in MAB mode only");
  }

  if (!(spec.prior_scale > 0.0) || !std::isfinite(spec.prior_scale))
    out.emplace_back("prior_scale must be positive");

  if (!spec.arm_sd.empty() && spec.arm_sd.size() != arms) {
    out.emplace_back("arm_sd must have one entry per arm");
  } else {
    for (double s : spec.arm_sd) {
      if (!(s > 0.0) || !std::isfinite(s)) {
        out.emplace_back("arm_sd entries must be positive");
        break;
      }
    }
    if (spec.variance_mode == VarianceMode::KNOWN_UNIT) {
      for (double s : spec.arm_sd) {
        if (s != 1.0) {
          out.emplace_back("KNOWN_UNIT requires unit arm_sd (use MISSPECIFIED_UNIT)");
          break;
        }
      }
    }
  }

  if (spec.variance_mode != VarianceMode::KNOWN_UNIT &&
      !(spec.burn_in > 0.0 && spec.burn_in < 1.0))
    out.emplace_back("burn_in must lie in (0, 1)");
  return out;
}

std::vector<std::string> validate_spec(const BanditSpec& spec, const HorizonSpec& horizon) {
  auto out = validate_spec(spec);
  if (horizon.n < 1) out.emplace_back("horizon n must be positive");
  if (horizon.batch_size < 1) out.emplace_back("batch_size must be positive");
  else if (horizon.n >= 1 && horizon.batch_size > horizon.n) out.emplace_back("batch_size exceeds horizon");
  if (spec.variance_mode != VarianceMode::KNOWN_UNIT && spec.burn_in > 0.0 && horizon.n >= 1 &&
      spec.burn_in * static_cast<double>(horizon.n) < 2.0 * spec.arms)
    out.emplace_back("burn-in too short: burn_in * n must be at least 2 * arms");
  return out;
}

namespace {
[[noreturn]] void throw_violations(const std::vector<std::string>& violations) {
  std::ostringstream msg;
  msg << "invalid bandit spec:";
  for (const auto& v : violations) msg << ' ' << v << ';';
  throw std::invalid_argument(msg.str());
}
}  // namespace

void require_valid(const BanditSpec& spec, const HorizonSpec& horizon) {
  if (auto v = validate_spec(spec, horizon); !v.empty()) throw_violations(v);
}

void require_valid(const BanditSpec& spec) {
  if (auto v = validate_spec(spec); !v.empty()) throw_violations(v);
}

void to_json(nlohmann::json& j, const BanditSpec& spec) {
  j = nlohmann::json{{"arms", spec.arms},
                     {"mode", to_string(spec.mode)},
                     {"gaps", spec.gaps},
                     {"theta0", spec.theta0},
                     {"contexts", spec.contexts},
                     {"prior_scale", spec.prior_scale},
                     {"arm_sd", spec.arm_sd},
                     {"variance_mode", to_string(spec.variance_mode)},
                     {"burn_in", spec.burn_in}};
}

void from_json(const nlohmann::json& j, BanditSpec& spec) {
  spec = BanditSpec{};
  spec.arms = j.at("arms").get<int>();
  spec.mode = parse_bandit_mode(j.value("mode", std::string("MAB")));
  spec.gaps = j.value("gaps", std::vector<double>{});
  spec.theta0 = j.value("theta0", std::vector<double>{});
  spec.contexts = j.value("contexts", std::vector<std::vector<double>>{});
  spec.prior_scale = j.at("prior_scale").get<double>();
  spec.arm_sd = j.value("arm_sd", std::vector<double>{});
  if (spec.arm_sd.empty() && spec.arms > 0) spec.arm_sd.assign(static_cast<std::size_t>(spec.arms), 1.0);
  spec.variance_mode = parse_variance_mode(j.value("variance_mode", std::string("KNOWN_UNIT")));
  spec.burn_in = j.value("burn_in", 0.0);
}

void to_json(nlohmann::json& j, const HorizonSpec& horizon) {
  j = nlohmann::json{{"n", horizon.n}, {"batch_size", horizon.batch_size}};
}

void from_json(const nlohmann::json& j, HorizonSpec& horizon) {
  horizon.n = j.at("n").get<std::int64_t>();
  horizon.batch_size = j.value("batch_size", std::int64_t{1});
}

std::uint64_t spec_hash(const BanditSpec& spec) {
  const std::string text = nlohmann::json(spec).dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string spec_hash_hex(const BanditSpec& spec) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(spec_hash(spec)));
  return buf;
}

}  // namespace tsdiff

#include "polopt/surrogate.hpp"

#include <cmath>
#include <fmt/format.h>

#include "polopt/error.hpp"
#include "polopt/rng.hpp"

namespace polopt {

namespace {

// Uniform in (0, 1].
double unit_open_closed(std::uint64_t h) {
  return static_cast<double>((h >> 11) + 1) * 0x1.0p-53;
}

std::uint64_t key_hash(std::uint64_t seed, std::string_view tag, std::string_view text) {
  return mix64(fnv1a(text, fnv1a(tag, mix64(seed))));
}

}  // namespace

SurrogateEvaluator::SurrogateEvaluator(SurrogateSettings settings)
    : settings_(std::move(settings)) {
  if (!(settings_.lambda > 0.0)) throw ConfigError("surrogate lambda must be > 0");
  if (settings_.strength_lo < 0.0 || !(settings_.strength_hi > settings_.strength_lo)) {
    throw ConfigError("surrogate strength range must satisfy 0 <= lo < hi");
  }
  if (settings_.plausibility < 1.0 || settings_.plausibility > 5.0) {
    throw ConfigError("surrogate plausibility must be in [1, 5]");
  }
  std::uint64_t overrides = 0xcbf29ce484222325ULL;
  for (const auto& [sid, sm] : settings_.base_overrides) {
    if (sm.first < 1.0 || sm.first > 5.0 || sm.second < 1.0 || sm.second > 5.0) {
      throw ConfigError(fmt::format("surrogate base override for {} outside [1, 5]", sid));
    }
    overrides = fnv1a(fmt::format("{}={:.17g},{:.17g};", sid, sm.first, sm.second), overrides);
  }
  id_ = fmt::format("surrogate/v1/seed={}/lambda={:.17g}/strength={:.17g}-{:.17g}/plaus={:.17g}",
                    settings_.seed, settings_.lambda, settings_.strength_lo,
                    settings_.strength_hi, settings_.plausibility);
  if (!settings_.base_overrides.empty()) id_ += fmt::format("/base={:016x}", overrides);
}

double SurrogateEvaluator::strength(Impact impact, int sap_id) const {
  const std::uint64_t h =
      key_hash(settings_.seed, "strength", fmt::format("{}#{}", to_string(impact), sap_id));
  return settings_.strength_lo +
         (settings_.strength_hi - settings_.strength_lo) * unit_open_closed(h);
}

std::pair<double, double> SurrogateEvaluator::base(const std::string& scenario_id) const {
  if (auto it = settings_.base_overrides.find(scenario_id); it != settings_.base_overrides.end()) {
    return it->second;
  }
  const double sev = 3.5 + unit_open_closed(key_hash(settings_.seed, "severity", scenario_id));
  const double mag = 3.5 + unit_open_closed(key_hash(settings_.seed, "magnitude", scenario_id));
  return {std::min(sev, 4.5), std::min(mag, 4.5)};
}

Scenario SurrogateEvaluator::rewrite(const Scenario& scenario, std::span<const Sap> selected) {
  Scenario out = rewritten_shell(scenario, selected);
  std::string header = "[policy:";
  for (std::size_t i = 0; i < out.policy.size(); ++i) {
    header += fmt::format("{}{}", i == 0 ? " " : ",", out.policy[i]);
  }
  header += "]\n";
  out.body = header + scenario.body;
  return out;
}

ScenarioRatings SurrogateEvaluator::rate(const Scenario& scenario) {
  const bool rewritten = scenario.kind == ScenarioKind::rewritten;
  const std::string& origin = rewritten && scenario.parent_id ? *scenario.parent_id : scenario.id;
  const auto [sev, mag] = base(origin);
  if (!rewritten) return {sev, mag, settings_.plausibility};

  double total = 0.0;
  for (int id : scenario.policy) total += strength(scenario.impact, id);
  const double decay = std::exp(-settings_.lambda * total);
  return {1.0 + (sev - 1.0) * decay, 1.0 + (mag - 1.0) * decay, settings_.plausibility};
}

}  // namespace polopt

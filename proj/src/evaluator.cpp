#include "polopt/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>

#include "polopt/cache.hpp"
#include "polopt/error.hpp"
#include "polopt/remote.hpp"
#include "polopt/surrogate.hpp"

namespace polopt {

std::vector<int> sorted_ids(std::span<const Sap> selected) {
  std::vector<int> ids;
  ids.reserve(selected.size());
  for (const Sap& s : selected) ids.push_back(s.id);
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

Scenario rewritten_shell(const Scenario& original, std::span<const Sap> selected) {
  if (selected.empty()) throw EmptySelectionError();
  Scenario out;
  out.policy = sorted_ids(selected);
  std::string suffix;
  for (int id : out.policy) suffix += fmt::format("{}{}", suffix.empty() ? "" : "-", id);
  out.id = original.id + "+" + suffix;
  out.impact = original.impact;
  out.kind = ScenarioKind::rewritten;
  out.parent_id = original.id;
  return out;
}

double pearson_correlation(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) {
    throw ValidationError(
        fmt::format("pearson: length mismatch ({} vs {})", xs.size(), ys.size()));
  }
  if (xs.size() < 2) throw ValidationError("pearson: need at least two points");
  const double n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx;
    const double dy = ys[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw ValidationError("pearson: undefined for zero variance");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

EvaluatorPtr make_evaluator(const EvaluatorSettings& settings) {
  EvaluatorPtr inner;
  if (settings.kind == "surrogate") {
    inner = std::make_shared<SurrogateEvaluator>(settings.surrogate);
  } else if (settings.kind == "remote") {
    inner = std::make_shared<RemoteEvaluator>(settings.remote);
  } else {
    throw ConfigError(fmt::format("unknown evaluator kind '{}'", settings.kind));
  }
  if (settings.cache_path.empty()) return inner;
  return std::make_shared<CachedEvaluator>(std::move(inner), CacheStore::open(settings.cache_path));
}

}  // namespace polopt

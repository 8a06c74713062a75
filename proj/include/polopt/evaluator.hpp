#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "polopt/domain.hpp"

namespace polopt {

struct TokenUsage {
  std::uint64_t prompt_tokens = 0;
  std::uint64_t completion_tokens = 0;
  std::uint64_t requests = 0;

  TokenUsage& operator+=(const TokenUsage& o) {
    prompt_tokens += o.prompt_tokens;
    completion_tokens += o.completion_tokens;
    requests += o.requests;
    return *this;
  }
  bool operator==(const TokenUsage&) const = default;
};

// Rewrites scenarios under a policy and rates scenarios. Implementations must
// be safe to call from several threads at once, and for a fixed id() must
// return the same output for the same input.
class Evaluator {
 public:
  virtual ~Evaluator() = default;

  // Returns a rewritten scenario whose parent_id is scenario.id and whose
  // policy holds the sorted ids of selected.
  virtual Scenario rewrite(const Scenario& scenario, std::span<const Sap> selected) = 0;
  virtual ScenarioRatings rate(const Scenario& scenario) = 0;
  virtual std::string id() const = 0;
  virtual TokenUsage usage() const { return {}; }
};

using EvaluatorPtr = std::shared_ptr<Evaluator>;

// Sorted, duplicate-free ids of a SAP list.
std::vector<int> sorted_ids(std::span<const Sap> selected);

// Builds the rewritten-scenario shell (id, parent, policy) shared by every
// evaluator; the body is left to the caller.
Scenario rewritten_shell(const Scenario& original, std::span<const Sap> selected);

// Pearson r. Throws ValidationError on length mismatch, fewer than two points
// or zero variance.
double pearson_correlation(std::span<const double> xs, std::span<const double> ys);

// Builds the evaluator described by settings, wrapped in the persistent cache
// when settings.cache_path is set.
EvaluatorPtr make_evaluator(const EvaluatorSettings& settings);

}  // namespace polopt

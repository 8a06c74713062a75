#pragma once

#include <utility>

#include "polopt/evaluator.hpp"

namespace polopt {

// Closed-form stand-in for the LLM pipeline. Each SAP gets a fixed strength
// in (strength_lo, strength_hi]; a policy with total strength T pulls the
// original severity and magnitude toward 1 by a factor exp(-lambda * T).
class SurrogateEvaluator final : public Evaluator {
 public:
  explicit SurrogateEvaluator(SurrogateSettings settings = {});

  Scenario rewrite(const Scenario& scenario, std::span<const Sap> selected) override;
  ScenarioRatings rate(const Scenario& scenario) override;
  std::string id() const override { return id_; }

  double strength(Impact impact, int sap_id) const;
  // (severity, magnitude) of an original scenario.
  std::pair<double, double> base(const std::string& scenario_id) const;
  const SurrogateSettings& settings() const noexcept { return settings_; }

 private:
  SurrogateSettings settings_;
  std::string id_;
};

}  // namespace polopt

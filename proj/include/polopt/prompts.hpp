#pragma once

#include <span>
#include <string>
#include <string_view>

#include "polopt/domain.hpp"

namespace polopt {

// One "<Stakeholder> must <action>" line, whitespace collapsed to single spaces.
std::string policy_line(const Sap& sap);

// Rewrite request: scenario-definition preamble for the scenario's impact,
// the original scenario, the legislation instruction, one line per SAP and
// the closing constraints. Throws ValidationError when selected is empty.
std::string build_rewrite_prompt(const Scenario& scenario, std::span<const Sap> selected);

// Five-judge rating request with the scenario between <scenario> delimiters.
// Throws ValidationError when the body is empty.
std::string build_rating_prompt(const Scenario& scenario);

// The text the impact name is substituted with inside the rewrite preamble.
std::string_view prompt_impact_name(Impact impact);

}  // namespace polopt

#pragma once

#include <array>
#include <string>
#include <string_view>
#include <vector>

#include "polopt/domain.hpp"
#include "polopt/error.hpp"

namespace polopt {

inline constexpr int kJudges = 5;

// Five judges x (severity, magnitude, plausibility), each in [1.0, 5.0] with
// one decimal place.
struct JudgePanelOutput {
  std::array<std::array<double, 3>, kJudges> scores{};
  bool operator==(const JudgePanelOutput&) const = default;
};

// Which judges feed each dimension. Indices are 1-based.
struct JudgeCombination {
  std::vector<int> severity{1, 2, 3, 4, 5};
  std::vector<int> magnitude{1, 2, 3, 4, 5};
  std::vector<int> plausibility{1, 2, 3, 4, 5};

  static JudgeCombination all() { return {}; }
  // Throws ValidationError on empty subsets or indices outside 1..5.
  void validate() const;
};

class PanelParseError : public EvaluationError {
 public:
  enum class Kind { judge_count, out_of_range, malformed };

  PanelParseError(Kind kind, const std::string& what, std::string raw)
      : EvaluationError(what), kind_(kind), raw_(std::move(raw)) {}

  Kind kind() const noexcept { return kind_; }
  const std::string& raw() const noexcept { return raw_; }

 private:
  Kind kind_;
  std::string raw_;
};

// Extracts the 5x3 matrix from a reply in the
// "J1: Severity; Magnitude; Plausibility: X.Y; A.B; C.D; ..." format.
JudgePanelOutput parse_panel_output(std::string_view text);

// Inverse of parse_panel_output.
std::string format_panel_output(const JudgePanelOutput& panel);

// Per-dimension mean over the judges the combination selects.
ScenarioRatings combine_judges(const JudgePanelOutput& panel, const JudgeCombination& combo);

}  // namespace polopt

#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "polopt/panel.hpp"

namespace testing {

// Golden judge-panel replies and what parsing each must produce.
struct PanelFixture {
  std::string file;
  std::optional<polopt::PanelParseError::Kind> error;  // nullopt: parses
};

inline const std::vector<PanelFixture>& panel_fixtures() {
  using K = polopt::PanelParseError::Kind;
  static const std::vector<PanelFixture> f = {
      {"well_formed.txt", std::nullopt},     {"whitespace_noisy.txt", std::nullopt},
      {"four_judges.txt", K::judge_count},   {"six_judges.txt", K::judge_count},
      {"repeated_judge.txt", K::judge_count}, {"out_of_range.txt", K::out_of_range},
      {"below_range.txt", K::out_of_range},  {"malformed.txt", K::malformed},
  };
  return f;
}

// Matrix both parsing fixtures encode.
inline polopt::JudgePanelOutput golden_panel() {
  polopt::JudgePanelOutput p;
  p.scores = {{{3.8, 2.7, 4.2}, {4.0, 3.1, 3.9}, {3.5, 2.9, 4.4}, {4.1, 3.3, 4.0}, {2.0, 2.0, 3.0}}};
  return p;
}

inline std::string fixture_path(const std::string& name) {
  return std::string(POLOPT_FIXTURE_DIR) + "/panel/" + name;
}

}  // namespace testing

#include "polopt/panel.hpp"

#include <charconv>
#include <fmt/format.h>
#include <regex>

namespace polopt {

namespace {

// Judge marker, optional axis labels, then three numbers.
const std::regex& entry_pattern() {
  static const std::regex re(
      R"(J\s*(\d+)\s*:\s*(?:Severity\s*;\s*Magnitude\s*;\s*Plausibility\s*:\s*)?)"
      R"(([-+]?\d+(?:\.\d+)?)\s*;\s*([-+]?\d+(?:\.\d+)?)\s*;\s*([-+]?\d+(?:\.\d+)?)\s*;?)",
      std::regex::icase | std::regex::optimize);
  return re;
}

const std::regex& marker_pattern() {
  static const std::regex re(R"(J\s*\d+\s*:)", std::regex::icase | std::regex::optimize);
  return re;
}

double to_value(const std::string& text, std::string_view raw) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw PanelParseError(PanelParseError::Kind::malformed,
                          fmt::format("unparseable score '{}'", text), std::string(raw));
  }
  return v;
}

std::size_t decimals(const std::string& text) {
  const auto dot = text.find('.');
  return dot == std::string::npos ? 0 : text.size() - dot - 1;
}

}  // namespace

void JudgeCombination::validate() const {
  auto check = [](const std::vector<int>& judges, std::string_view dim) {
    if (judges.empty()) {
      throw ValidationError(fmt::format("judge combination: no judges for {}", dim));
    }
    for (int j : judges) {
      if (j < 1 || j > kJudges) {
        throw ValidationError(fmt::format("judge combination: judge {} outside 1..5", j));
      }
    }
  };
  check(severity, "severity");
  check(magnitude, "magnitude");
  check(plausibility, "plausibility");
}

JudgePanelOutput parse_panel_output(std::string_view text) {
  const std::string raw(text);
  const auto markers = std::distance(
      std::sregex_iterator(raw.begin(), raw.end(), marker_pattern()), std::sregex_iterator());

  JudgePanelOutput out;
  std::array<bool, kJudges> seen{};
  int entries = 0;
  for (auto it = std::sregex_iterator(raw.begin(), raw.end(), entry_pattern());
       it != std::sregex_iterator(); ++it) {
    const std::smatch& m = *it;
    ++entries;
    const int judge = std::stoi(m[1].str());
    if (judge < 1 || judge > kJudges) {
      throw PanelParseError(PanelParseError::Kind::judge_count,
                            fmt::format("judge J{} outside J1..J5", judge), raw);
    }
    if (seen[judge - 1]) {
      throw PanelParseError(PanelParseError::Kind::judge_count,
                            fmt::format("judge J{} appears twice", judge), raw);
    }
    seen[judge - 1] = true;
    for (int d = 0; d < 3; ++d) {
      const std::string token = m[d + 2].str();
      const double v = to_value(token, raw);
      if (v < 1.0 || v > 5.0) {
        throw PanelParseError(PanelParseError::Kind::out_of_range,
                              fmt::format("J{} score {} outside [1.0, 5.0]", judge, token), raw);
      }
      if (decimals(token) > 1) {
        throw PanelParseError(PanelParseError::Kind::malformed,
                              fmt::format("J{} score {} has more than one decimal", judge, token),
                              raw);
      }
      out.scores[judge - 1][d] = v;
    }
  }
  if (markers != entries) {
    throw PanelParseError(PanelParseError::Kind::malformed,
                          fmt::format("{} judge entries could not be parsed", markers - entries),
                          raw);
  }
  if (entries != kJudges) {
    throw PanelParseError(PanelParseError::Kind::judge_count,
                          fmt::format("expected 5 judges, found {}", entries), raw);
  }
  return out;
}

std::string format_panel_output(const JudgePanelOutput& panel) {
  std::string out;
  for (int j = 0; j < kJudges; ++j) {
    if (j > 0) out += ", ";
    const auto& s = panel.scores[j];
    out += fmt::format("J{}: Severity; Magnitude; Plausibility: {:.1f}; {:.1f}; {:.1f};", j + 1,
                       s[0], s[1], s[2]);
  }
  return out;
}

ScenarioRatings combine_judges(const JudgePanelOutput& panel, const JudgeCombination& combo) {
  combo.validate();
  auto mean = [&](const std::vector<int>& judges, int dim) {
    double sum = 0.0;
    for (int j : judges) sum += panel.scores[j - 1][dim];
    return sum / static_cast<double>(judges.size());
  };
  return ScenarioRatings{mean(combo.severity, 0), mean(combo.magnitude, 1),
                         mean(combo.plausibility, 2)};
}

}  // namespace polopt

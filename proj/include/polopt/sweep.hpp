#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "polopt/engine.hpp"

namespace polopt {

struct SweepRow {
  std::string label;
  WeightSet weights;
};

struct SweepSpec {
  Impact impact = Impact::political_manipulation;
  int repeats = 1;
  RunConfig base;
  std::vector<SweepRow> rows;
};

// {"impact", "repeats", "base": <config>, "rows": [{"label", "alpha", "beta",
// "gamma", "w_s"?, "w_m"?}]}. Empty rows, duplicate labels or repeats < 1
// raise ValidationError.
SweepSpec sweep_from_json(const nlohmann::json& j);
SweepSpec load_sweep_spec(const std::filesystem::path& path);

// Config for one row and repeat: base with the row's weights and label, seed
// base.seed + repeat.
RunConfig sweep_config(const SweepSpec& spec, std::size_t row, int repeat);

struct SweepRun {
  std::size_t row = 0;
  int repeat = 0;
  std::filesystem::path dir;
  std::optional<RunResult> result;
  std::string error;
};

// Runs rows x repeats, up to `jobs` at a time. Each finished run is written
// to out_dir/<label>-r<repeat>/. Failures are recorded and the sweep goes on.
std::vector<SweepRun> run_sweep(const SweepSpec& spec, const DatasetBundle& bundle,
                                const EngineOptions& options, const std::filesystem::path& out_dir,
                                int jobs);

// One line per row: label, weights, run/failure counts, mean severity and
// magnitude deltas, mean/min/max selected-SAP count and percentage of the
// table, mean cost, mean participatory average and mean nonviable count.
void write_sweep_summary(std::ostream& out, const SweepSpec& spec,
                         const std::vector<SweepRun>& runs, const SapTable& table);

// Lowercase letters and digits with '-' separators.
std::string slug(std::string_view text);

}  // namespace polopt

#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "polopt/domain.hpp"

namespace polopt {

inline constexpr std::size_t kScenariosPerImpact = 3;
inline constexpr std::size_t kCombinedScenariosPerImpact = 2;

struct DatasetBundle {
  std::map<Impact, SapTable> tables;            // single impacts
  std::map<Impact, std::vector<Scenario>> scenarios;  // originals, by impact
  std::optional<SapTable> overlap_table;        // merged overlap rows with their sources
  std::map<Impact, std::vector<std::string>> combined_ids;
  std::string version;
};

// Expert panel cost: 4 if any panelist rated the SAP nonviable, else the mean.
double panel_cost(std::span<const double> ratings);

// Reads the canonical CSV (or its JSON mirror, detected by a leading '[').
// Overlap files (impact == combined) need a `sources` column and are exempt
// from the score/product check.
SapTable load_sap_table(std::istream& in, Impact impact);
SapTable load_sap_table(const std::filesystem::path& path, Impact impact);
void write_sap_table(std::ostream& out, const SapTable& table);

// All records of a scenario manifest, unfiltered.
struct ScenarioManifest {
  std::vector<Scenario> scenarios;
  std::map<Impact, std::vector<std::string>> combined_ids;
  std::string version;
};
ScenarioManifest load_scenario_manifest(std::istream& in);

// Originals for one impact (exactly 3), or for Impact::combined the 2 listed
// ids per impact (6 total).
std::vector<Scenario> load_scenarios(std::istream& in, Impact impact);
std::vector<Scenario> select_scenarios(const ScenarioManifest& manifest, Impact impact);

// 52 impact-unique rows plus the 10 overlap rows, renumbered 1..n.
SapTable merged_table(const DatasetBundle& bundle);

struct TableReport {
  std::size_t saps = 0;
  std::size_t nonviable = 0;
  std::size_t feasible = 0;
  std::size_t scenarios = 0;
};

struct ValidationReport {
  std::map<Impact, TableReport> tables;
  std::vector<std::string> violations;
  bool ok() const noexcept { return violations.empty(); }
};

ValidationReport validate_bundle(const DatasetBundle& bundle);

// Loads saps_<impact>.csv, saps_combined.csv and scenarios.json from a data
// directory. Missing files raise IoError; malformed rows raise ValidationError.
DatasetBundle load_bundle(const std::filesystem::path& dir);

// The SAP table for an impact, merging for Impact::combined.
SapTable table_for(const DatasetBundle& bundle, Impact impact);
std::vector<Scenario> scenarios_for(const DatasetBundle& bundle, Impact impact);

nlohmann::ordered_json to_json(const Sap& sap);

}  // namespace polopt

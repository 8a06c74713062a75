#include "polopt/datasets.hpp"

#include <algorithm>
#include <charconv>
#include <fmt/format.h>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "polopt/csv.hpp"
#include "polopt/error.hpp"
#include "polopt/rng.hpp"

namespace polopt {

namespace {

constexpr const char* kRequiredColumns[] = {"id",       "stakeholder", "action", "priority",
                                            "agreement", "score"};

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

double parse_double(const std::string& text, std::size_t line, std::string_view column) {
  const std::string t = trim(text);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc{} || ptr != t.data() + t.size()) {
    throw ValidationError(fmt::format("line {}: column '{}' is not a number: '{}'", line, column, text));
  }
  return v;
}

int parse_int(const std::string& text, std::size_t line, std::string_view column) {
  const std::string t = trim(text);
  int v = 0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc{} || ptr != t.data() + t.size()) {
    throw ValidationError(fmt::format("line {}: column '{}' is not an integer: '{}'", line, column, text));
  }
  return v;
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto pos = s.find(sep, start);
    const auto end = pos == std::string_view::npos ? s.size() : pos;
    std::string part = trim(s.substr(start, end - start));
    if (!part.empty()) out.push_back(std::move(part));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i > 0) out += sep;
    out += parts[i];
  }
  return out;
}

// Shared post-processing for both file formats.
void finish_table(SapTable& table) {
  const bool overlap = table.impact == Impact::combined;
  std::set<int> seen;
  for (std::size_t i = 0; i < table.saps.size(); ++i) {
    Sap& s = table.saps[i];
    const std::size_t line = i + 2;
    s.nonviable = s.cost == 4.0;
    try {
      validate_sap(s, !overlap);
    } catch (const ValidationError& e) {
      throw ValidationError(fmt::format("line {}: {}", line, e.what()));
    }
    if (!seen.insert(s.id).second) {
      throw ValidationError(fmt::format("line {}: duplicate SAP id {}", line, s.id));
    }
    if (s.id != static_cast<int>(i + 1)) {
      throw ValidationError(
          fmt::format("line {}: SAP ids must be 1..n in table order (found {})", line, s.id));
    }
    if (overlap && s.sources.empty()) {
      throw ValidationError(fmt::format("line {}: overlap row lacks sources", line));
    }
  }
}

SapTable load_csv_table(std::istream& in, Impact impact) {
  std::vector<csv::Row> rows;
  try {
    rows = csv::read(in);
  } catch (const std::exception& e) {
    throw ValidationError(fmt::format("malformed CSV: {}", e.what()));
  }
  if (rows.empty()) throw ValidationError("SAP table is empty (no header)");

  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < rows[0].size(); ++i) col[trim(rows[0][i])] = i;
  for (const char* name : kRequiredColumns) {
    if (!col.contains(name)) throw ValidationError(fmt::format("missing column '{}'", name));
  }
  const bool has_panel = col.contains("cost_panel");
  if (!col.contains("cost") && !has_panel) throw ValidationError("missing column 'cost'");
  if (impact == Impact::combined && !col.contains("sources")) {
    throw ValidationError("missing column 'sources'");
  }

  SapTable table;
  table.impact = impact;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const csv::Row& row = rows[r];
    const std::size_t line = r + 1;
    if (row.size() != rows[0].size()) {
      throw ValidationError(fmt::format("line {}: expected {} fields, found {}", line,
                                        rows[0].size(), row.size()));
    }
    auto field = [&](const char* name) -> const std::string& { return row[col.at(name)]; };
    auto optional = [&](const char* name) -> std::string {
      return col.contains(name) ? trim(row[col.at(name)]) : std::string{};
    };
    Sap s;
    s.id = parse_int(field("id"), line, "id");
    s.stakeholder = trim(field("stakeholder"));
    s.action = trim(field("action"));
    const std::string panel = optional("cost_panel");
    if (!panel.empty()) {
      std::vector<double> ratings;
      for (const auto& p : split(panel, ';')) ratings.push_back(parse_double(p, line, "cost_panel"));
      s.cost = panel_cost(ratings);
      if (col.contains("cost") && !trim(field("cost")).empty()) {
        const double stated = parse_double(field("cost"), line, "cost");
        if (std::abs(stated - s.cost) > 0.01) {
          throw ValidationError(fmt::format(
              "line {}: cost {} disagrees with panel ratings (expected {})", line, stated, s.cost));
        }
      }
    } else {
      if (!col.contains("cost")) throw ValidationError(fmt::format("line {}: no cost given", line));
      s.cost = parse_double(field("cost"), line, "cost");
    }
    s.priority = parse_double(field("priority"), line, "priority");
    s.agreement = parse_double(field("agreement"), line, "agreement");
    s.participatory_score = parse_double(field("score"), line, "score");
    s.stakeholder_full = optional("stakeholder_full");
    s.action_full = optional("action_full");
    s.sources = split(optional("sources"), '/');
    table.saps.push_back(std::move(s));
  }
  finish_table(table);
  return table;
}

SapTable load_json_table(std::istream& in, Impact impact) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(fmt::format("malformed JSON SAP table: {}", e.what()));
  }
  if (!doc.is_array()) throw ValidationError("JSON SAP table must be an array");
  SapTable table;
  table.impact = impact;
  std::size_t line = 1;
  for (const auto& rec : doc) {
    ++line;
    try {
      Sap s;
      s.id = rec.at("id").get<int>();
      s.stakeholder = rec.at("stakeholder").get<std::string>();
      s.action = rec.at("action").get<std::string>();
      if (rec.contains("cost_panel")) {
        s.cost = panel_cost(rec.at("cost_panel").get<std::vector<double>>());
      } else {
        s.cost = rec.at("cost").get<double>();
      }
      s.priority = rec.at("priority").get<double>();
      s.agreement = rec.at("agreement").get<double>();
      s.participatory_score = rec.at("score").get<double>();
      s.stakeholder_full = rec.value("stakeholder_full", "");
      s.action_full = rec.value("action_full", "");
      if (rec.contains("sources")) {
        const auto& src = rec.at("sources");
        s.sources = src.is_string() ? split(src.get<std::string>(), '/')
                                    : src.get<std::vector<std::string>>();
      }
      table.saps.push_back(std::move(s));
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(fmt::format("record {}: {}", line - 1, e.what()));
    }
  }
  finish_table(table);
  return table;
}

Scenario scenario_from_json(const nlohmann::json& rec) {
  Scenario s;
  try {
    s.id = rec.at("id").get<std::string>();
    s.impact = parse_impact(rec.at("impact").get<std::string>());
    s.body = rec.at("body").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(fmt::format("scenario record: {}", e.what()));
  }
  if (s.id.empty()) throw ValidationError("scenario with empty id");
  if (trim(s.body).empty()) throw ValidationError(fmt::format("scenario {} has an empty body", s.id));
  return s;
}

}  // namespace

double panel_cost(std::span<const double> ratings) {
  if (ratings.empty()) throw ValidationError("cost panel has no ratings");
  for (double r : ratings) {
    if (r == 4.0) return 4.0;
  }
  return std::accumulate(ratings.begin(), ratings.end(), 0.0) / static_cast<double>(ratings.size());
}

SapTable load_sap_table(std::istream& in, Impact impact) {
  while (std::isspace(in.peek())) in.get();
  if (in.peek() == '[') return load_json_table(in, impact);
  return load_csv_table(in, impact);
}

SapTable load_sap_table(const std::filesystem::path& path, Impact impact) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open {}", path.string()));
  try {
    return load_sap_table(in, impact);
  } catch (const ValidationError& e) {
    throw ValidationError(fmt::format("{}: {}", path.filename().string(), e.what()));
  }
}

void write_sap_table(std::ostream& out, const SapTable& table) {
  const bool has_full = std::any_of(table.saps.begin(), table.saps.end(), [](const Sap& s) {
    return !s.stakeholder_full.empty() || !s.action_full.empty();
  });
  const bool has_sources = std::any_of(table.saps.begin(), table.saps.end(),
                                       [](const Sap& s) { return !s.sources.empty(); });
  csv::Row header{"id", "stakeholder", "action", "cost", "priority", "agreement", "score"};
  if (has_full) {
    header.push_back("stakeholder_full");
    header.push_back("action_full");
  }
  if (has_sources) header.push_back("sources");
  csv::write_row(out, header);
  for (const Sap& s : table.saps) {
    csv::Row row{std::to_string(s.id),           s.stakeholder,
                 s.action,                       csv::format_number(s.cost),
                 csv::format_number(s.priority), csv::format_number(s.agreement),
                 csv::format_number(s.participatory_score)};
    if (has_full) {
      row.push_back(s.stakeholder_full);
      row.push_back(s.action_full);
    }
    if (has_sources) row.push_back(join(s.sources, "/"));
    csv::write_row(out, row);
  }
}

ScenarioManifest load_scenario_manifest(std::istream& in) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(fmt::format("malformed scenario manifest: {}", e.what()));
  }
  ScenarioManifest m;
  const nlohmann::json* records = &doc;
  if (doc.is_object()) {
    if (!doc.contains("scenarios")) throw ValidationError("scenario manifest lacks 'scenarios'");
    records = &doc.at("scenarios");
    m.version = doc.value("version", "");
    if (doc.contains("combined")) {
      for (const auto& [name, ids] : doc.at("combined").items()) {
        m.combined_ids[parse_impact(name)] = ids.get<std::vector<std::string>>();
      }
    }
  }
  if (!records->is_array()) throw ValidationError("scenario records must be an array");
  std::set<std::string> seen;
  for (const auto& rec : *records) {
    Scenario s = scenario_from_json(rec);
    if (!seen.insert(s.id).second) throw ValidationError(fmt::format("duplicate scenario id {}", s.id));
    m.scenarios.push_back(std::move(s));
  }
  return m;
}

std::vector<Scenario> select_scenarios(const ScenarioManifest& manifest, Impact impact) {
  std::vector<Scenario> out;
  if (impact != Impact::combined) {
    for (const Scenario& s : manifest.scenarios) {
      if (s.impact == impact) out.push_back(s);
    }
    if (out.size() != kScenariosPerImpact) {
      throw ValidationError(fmt::format("{}: scenario count {} != {}", to_string(impact),
                                        out.size(), kScenariosPerImpact));
    }
    return out;
  }
  for (Impact single : kSingleImpacts) {
    auto it = manifest.combined_ids.find(single);
    const std::size_t n = it == manifest.combined_ids.end() ? 0 : it->second.size();
    if (n != kCombinedScenariosPerImpact) {
      throw ValidationError(fmt::format("combined: {} lists {} scenarios, expected {}",
                                        to_string(single), n, kCombinedScenariosPerImpact));
    }
    for (const std::string& id : it->second) {
      auto found = std::find_if(manifest.scenarios.begin(), manifest.scenarios.end(),
                                [&](const Scenario& s) { return s.id == id; });
      if (found == manifest.scenarios.end() || found->impact != single) {
        throw ValidationError(
            fmt::format("combined: scenario {} is not a {} scenario", id, to_string(single)));
      }
      out.push_back(*found);
    }
  }
  return out;
}

std::vector<Scenario> load_scenarios(std::istream& in, Impact impact) {
  return select_scenarios(load_scenario_manifest(in), impact);
}

SapTable merged_table(const DatasetBundle& bundle) {
  if (!bundle.overlap_table) throw ValidationError("merged table requires the overlap table");
  for (Impact single : kSingleImpacts) {
    if (!bundle.tables.contains(single)) {
      throw ValidationError(fmt::format("merged table requires the {} table", to_string(single)));
    }
  }
  // Source key ("PM2") -> overlap row.
  std::map<std::string, const Sap*> overlap_of;
  for (const Sap& row : bundle.overlap_table->saps) {
    for (const std::string& src : row.sources) {
      std::size_t digits = 0;
      while (digits < src.size() && std::isalpha(static_cast<unsigned char>(src[digits]))) ++digits;
      const std::string prefix = src.substr(0, digits);
      Impact impact;
      int id = 0;
      try {
        impact = parse_impact(prefix);
        id = std::stoi(src.substr(digits));
      } catch (const std::exception&) {
        throw ValidationError(fmt::format("overlap row {}: malformed source id '{}'", row.id, src));
      }
      if (impact == Impact::combined || bundle.tables.at(impact).find(id) == nullptr) {
        throw ValidationError(fmt::format("overlap row {}: unknown source id '{}'", row.id, src));
      }
      const std::string key = fmt::format("{}{}", prefix, id);
      if (!overlap_of.emplace(key, &row).second) {
        throw ValidationError(fmt::format("source id {} appears in two overlap rows", key));
      }
    }
  }

  SapTable merged;
  merged.impact = Impact::combined;
  std::set<const Sap*> emitted;
  for (Impact single : kSingleImpacts) {
    for (const Sap& s : bundle.tables.at(single).saps) {
      const std::string key = fmt::format("{}{}", source_prefix(single), s.id);
      Sap out;
      if (auto it = overlap_of.find(key); it != overlap_of.end()) {
        if (!emitted.insert(it->second).second) continue;
        out = *it->second;
      } else {
        out = s;
        out.sources = {key};
      }
      out.id = static_cast<int>(merged.saps.size() + 1);
      merged.saps.push_back(std::move(out));
    }
  }
  return merged;
}

ValidationReport validate_bundle(const DatasetBundle& bundle) {
  ValidationReport report;
  for (Impact single : kSingleImpacts) {
    TableReport tr;
    auto it = bundle.tables.find(single);
    if (it == bundle.tables.end()) {
      report.violations.push_back(fmt::format("{}: SAP table missing", to_string(single)));
    } else {
      const SapTable& t = it->second;
      tr.saps = t.size();
      tr.nonviable = t.nonviable_count();
      tr.feasible = t.feasible_count();
      for (std::size_t i = 0; i < t.saps.size(); ++i) {
        try {
          validate_sap(t.saps[i], true);
          if (t.saps[i].id != static_cast<int>(i + 1)) {
            throw ValidationError(fmt::format("SAP id {} out of sequence", t.saps[i].id));
          }
        } catch (const ValidationError& e) {
          report.violations.push_back(
              fmt::format("{} row {}: {}", to_string(single), i + 1, e.what()));
        }
      }
    }
    auto sc = bundle.scenarios.find(single);
    tr.scenarios = sc == bundle.scenarios.end() ? 0 : sc->second.size();
    if (tr.scenarios != kScenariosPerImpact) {
      report.violations.push_back(fmt::format("{}: scenario count {} != {}", to_string(single),
                                              tr.scenarios, kScenariosPerImpact));
    }
    report.tables[single] = tr;
  }
  if (!bundle.overlap_table) {
    report.violations.push_back("combined: overlap table missing");
  } else {
    try {
      const SapTable merged = merged_table(bundle);
      TableReport tr;
      tr.saps = merged.size();
      tr.nonviable = merged.nonviable_count();
      tr.feasible = merged.feasible_count();
      ScenarioManifest m;
      for (const auto& [impact, list] : bundle.scenarios) {
        m.scenarios.insert(m.scenarios.end(), list.begin(), list.end());
      }
      m.combined_ids = bundle.combined_ids;
      try {
        tr.scenarios = select_scenarios(m, Impact::combined).size();
      } catch (const ValidationError& e) {
        report.violations.push_back(e.what());
      }
      report.tables[Impact::combined] = tr;
    } catch (const ValidationError& e) {
      report.violations.push_back(fmt::format("combined: {}", e.what()));
    }
  }
  return report;
}

DatasetBundle load_bundle(const std::filesystem::path& dir) {
  DatasetBundle bundle;
  std::ostringstream canonical;
  for (Impact single : kSingleImpacts) {
    SapTable t = load_sap_table(dir / fmt::format("saps_{}.csv", to_string(single)), single);
    write_sap_table(canonical, t);
    bundle.tables.emplace(single, std::move(t));
  }
  bundle.overlap_table = load_sap_table(dir / "saps_combined.csv", Impact::combined);
  write_sap_table(canonical, *bundle.overlap_table);

  const auto scenario_path = dir / "scenarios.json";
  std::ifstream in(scenario_path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open {}", scenario_path.string()));
  ScenarioManifest m = load_scenario_manifest(in);
  for (const Scenario& s : m.scenarios) {
    bundle.scenarios[s.impact].push_back(s);
    canonical << s.id << '\n' << to_string(s.impact) << '\n' << s.body << '\n';
  }
  for (const auto& [impact, ids] : m.combined_ids) {
    for (const auto& id : ids) canonical << to_string(impact) << ':' << id << '\n';
  }
  bundle.combined_ids = m.combined_ids;
  bundle.version = fmt::format("{}+{:016x}", m.version.empty() ? "unversioned" : m.version,
                               fnv1a(canonical.str()));
  return bundle;
}

SapTable table_for(const DatasetBundle& bundle, Impact impact) {
  if (impact == Impact::combined) return merged_table(bundle);
  auto it = bundle.tables.find(impact);
  if (it == bundle.tables.end()) {
    throw ValidationError(fmt::format("no SAP table for {}", to_string(impact)));
  }
  return it->second;
}

std::vector<Scenario> scenarios_for(const DatasetBundle& bundle, Impact impact) {
  ScenarioManifest m;
  for (const auto& [i, list] : bundle.scenarios) m.scenarios.insert(m.scenarios.end(), list.begin(), list.end());
  m.combined_ids = bundle.combined_ids;
  return select_scenarios(m, impact);
}

nlohmann::ordered_json to_json(const Sap& s) {
  nlohmann::ordered_json j;
  j["id"] = s.id;
  j["stakeholder"] = s.stakeholder;
  j["action"] = s.action;
  j["cost"] = s.cost;
  j["nonviable"] = s.nonviable;
  j["priority"] = s.priority;
  j["agreement"] = s.agreement;
  j["score"] = s.participatory_score;
  if (!s.sources.empty()) j["sources"] = s.sources;
  return j;
}

}  // namespace polopt

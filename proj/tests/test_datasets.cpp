#include "doctest.h"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "polopt/datasets.hpp"
#include "polopt/error.hpp"
#include "support.hpp"

using namespace polopt;
using testing::bundle;

namespace {

// Counted directly from the CSV text, independent of the loader.
struct RawCounts {
  int rows = 0;
  int cost4 = 0;
};

RawCounts raw_counts(const std::string& file) {
  std::ifstream in(testing::data_dir() / file);
  std::string line;
  std::getline(in, line);  // header
  RawCounts c;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ++c.rows;
    // cost is the 4th field.
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (char ch : line) {
      if (ch == '"') quoted = !quoted;
      else if (ch == ',' && !quoted) {
        fields.push_back(cur);
        cur.clear();
      } else {
        cur.push_back(ch);
      }
    }
    fields.push_back(cur);
    if (fields.size() > 3 && fields[3] == "4") ++c.cost4;
  }
  return c;
}

}  // namespace

TEST_CASE("shipped tables have the published sizes") {
  const auto& b = bundle();
  CHECK(b.tables.at(Impact::political_manipulation).size() == 31);
  CHECK(b.tables.at(Impact::unemployment).size() == 16);
  CHECK(b.tables.at(Impact::sensationalism).size() == 26);

  CHECK(b.tables.at(Impact::political_manipulation).nonviable_count() == 9);
  CHECK(b.tables.at(Impact::unemployment).nonviable_count() == 1);
  CHECK(b.tables.at(Impact::sensationalism).nonviable_count() == 10);
  CHECK(b.tables.at(Impact::political_manipulation).feasible_count() == 22);
  CHECK(b.tables.at(Impact::unemployment).feasible_count() == 15);
  CHECK(b.tables.at(Impact::sensationalism).feasible_count() == 16);
}

TEST_CASE("loader counts agree with a raw text count") {
  const std::pair<const char*, Impact> files[] = {
      {"saps_political_manipulation.csv", Impact::political_manipulation},
      {"saps_unemployment.csv", Impact::unemployment},
      {"saps_sensationalism.csv", Impact::sensationalism}};
  for (const auto& [file, impact] : files) {
    const RawCounts raw = raw_counts(file);
    const SapTable& t = bundle().tables.at(impact);
    CHECK(static_cast<int>(t.size()) == raw.rows);
    CHECK(static_cast<int>(t.nonviable_count()) == raw.cost4);
  }
}

TEST_CASE("spot rows") {
  const SapTable& pm = bundle().tables.at(Impact::political_manipulation);
  const Sap& pm1 = pm.at(1);
  CHECK(pm1.stakeholder == "Tech companies");
  CHECK(pm1.cost == 2.0);
  CHECK(pm1.priority == 2.82);
  CHECK(pm1.agreement == 7.00);
  CHECK(pm1.participatory_score == 19.74);
  CHECK_FALSE(pm1.nonviable);

  const Sap& pm30 = pm.at(30);
  CHECK(pm30.cost == 4.0);
  CHECK(pm30.nonviable);
  CHECK(pm30.participatory_score == 7.11);

  CHECK(pm.at(31).participatory_score == 7.89);
  CHECK(pm.at(2).cost == 1.0);
  CHECK(pm.at(6).cost == 3.0);

  const SapTable& lu = bundle().tables.at(Impact::unemployment);
  CHECK(lu.at(1).participatory_score == 14.24);
  CHECK(lu.at(1).cost == 2.25);
  CHECK(lu.at(10).cost == 1.0);
  CHECK(std::abs(lu.at(1).priority * lu.at(1).agreement - 14.24) <= 0.01);
}

TEST_CASE("every single-impact row satisfies score = priority x agreement within 0.01") {
  for (Impact i : kSingleImpacts) {
    for (const Sap& s : bundle().tables.at(i).saps) {
      CHECK_MESSAGE(std::abs(s.participatory_score - s.priority * s.agreement) <= 0.01,
                    to_string(i), " row ", s.id);
      CHECK(s.nonviable == (s.cost == 4.0));
    }
  }
}

TEST_CASE("ids are 1..n in file order") {
  for (Impact i : kSingleImpacts) {
    const SapTable& t = bundle().tables.at(i);
    for (std::size_t k = 0; k < t.size(); ++k) CHECK(t.saps[k].id == static_cast<int>(k + 1));
  }
}

TEST_CASE("merged table") {
  const SapTable merged = merged_table(bundle());
  CHECK(merged.size() == 62);
  CHECK(merged.impact == Impact::combined);

  int overlap = 0;
  const Sap* pm2_ms1 = nullptr;
  const Sap* fact_check = nullptr;
  for (const Sap& s : merged.saps) {
    if (s.sources.size() > 1) ++overlap;
    if (s.sources == std::vector<std::string>{"PM2", "MS1"}) pm2_ms1 = &s;
    if (s.sources == std::vector<std::string>{"PM6", "LU1", "MS5"}) fact_check = &s;
  }
  CHECK(overlap == 10);
  REQUIRE(pm2_ms1 != nullptr);
  CHECK(pm2_ms1->cost == 2.0);
  CHECK(pm2_ms1->priority == 2.80);
  CHECK(pm2_ms1->agreement == 6.71);
  CHECK(pm2_ms1->participatory_score == 18.79);
  REQUIRE(fact_check != nullptr);
  CHECK(fact_check->cost == 2.5);
  CHECK(fact_check->priority == 2.44);
  CHECK(fact_check->agreement == 6.45);
  CHECK(fact_check->participatory_score == 15.74);

  // Overlap rows are taken verbatim, not averaged from their sources.
  const double mean_priority = (bundle().tables.at(Impact::political_manipulation).at(6).priority +
                                bundle().tables.at(Impact::unemployment).at(1).priority +
                                bundle().tables.at(Impact::sensationalism).at(5).priority) /
                               3.0;
  CHECK(std::abs(mean_priority - fact_check->priority) > 0.05);

  for (std::size_t k = 0; k < merged.size(); ++k) {
    CHECK(merged.saps[k].id == static_cast<int>(k + 1));
  }
  CHECK(merged_table(bundle()) == merged);
}

TEST_CASE("merged table does not depend on table load order") {
  DatasetBundle b;
  b.overlap_table = bundle().overlap_table;
  b.combined_ids = bundle().combined_ids;
  for (Impact i : {Impact::sensationalism, Impact::political_manipulation, Impact::unemployment}) {
    b.tables.emplace(i, bundle().tables.at(i));
  }
  CHECK(merged_table(b) == merged_table(bundle()));
}

TEST_CASE("merged table rejects unknown source ids") {
  DatasetBundle b = bundle();
  b.overlap_table->saps[0].sources = {"PM99", "MS1"};
  CHECK_THROWS_WITH_AS(merged_table(b), doctest::Contains("PM99"), ValidationError);
}

TEST_CASE("scenario counts") {
  for (Impact i : kSingleImpacts) CHECK(scenarios_for(bundle(), i).size() == 3);
  const auto combined = scenarios_for(bundle(), Impact::combined);
  CHECK(combined.size() == 6);
  for (const Scenario& s : combined) {
    CHECK(s.kind == ScenarioKind::original);
    CHECK_FALSE(s.body.empty());
  }
}

TEST_CASE("load_scenarios enforces the per-mode count") {
  const std::string two = R"({"scenarios": [
    {"id": "a", "impact": "political_manipulation", "body": "x"},
    {"id": "b", "impact": "political_manipulation", "body": "y"}]})";
  std::istringstream in(two);
  CHECK_THROWS_WITH_AS(load_scenarios(in, Impact::political_manipulation),
                       doctest::Contains("scenario count 2"), ValidationError);

  const std::string empty_body = R"([{"id": "a", "impact": "unemployment", "body": "  "}])";
  std::istringstream in2(empty_body);
  CHECK_THROWS_AS(load_scenario_manifest(in2), ValidationError);
}

TEST_CASE("CSV round trip is exact") {
  for (Impact i : kSingleImpacts) {
    const SapTable& t = bundle().tables.at(i);
    std::stringstream ss;
    write_sap_table(ss, t);
    const std::string first = ss.str();
    CHECK(load_sap_table(ss, i) == t);
    std::istringstream reread(first);
    std::stringstream again;
    write_sap_table(again, load_sap_table(reread, i));
    CHECK(again.str() == first);
  }
  std::stringstream ss;
  write_sap_table(ss, *bundle().overlap_table);
  CHECK(load_sap_table(ss, Impact::combined) == *bundle().overlap_table);
}

TEST_CASE("JSON mirror loads to the same table") {
  const SapTable& t = bundle().tables.at(Impact::unemployment);
  nlohmann::json arr = nlohmann::json::array();
  for (const Sap& s : t.saps) {
    arr.push_back({{"id", s.id}, {"stakeholder", s.stakeholder}, {"action", s.action},
                   {"cost", s.cost}, {"priority", s.priority}, {"agreement", s.agreement},
                   {"score", s.participatory_score}, {"stakeholder_full", s.stakeholder_full},
                   {"action_full", s.action_full}});
  }
  std::istringstream in("  " + arr.dump());
  CHECK(load_sap_table(in, Impact::unemployment) == t);
}

TEST_CASE("loader errors name the row") {
  const std::string header = "id,stakeholder,action,cost,priority,agreement,score\n";
  {
    std::istringstream in(header + "1,A,do,2,2.82,7.00,99\n");
    CHECK_THROWS_WITH_AS(load_sap_table(in, Impact::political_manipulation),
                         doctest::Contains("line 2"), ValidationError);
  }
  {
    std::istringstream in(header + "1,A,do,2,2,2,4\n1,B,do,2,2,2,4\n");
    CHECK_THROWS_WITH_AS(load_sap_table(in, Impact::political_manipulation),
                         doctest::Contains("duplicate"), ValidationError);
  }
  {
    std::istringstream in("id,stakeholder,action,cost,priority,agreement\n1,A,do,2,2,2\n");
    CHECK_THROWS_WITH_AS(load_sap_table(in, Impact::political_manipulation),
                         doctest::Contains("score"), ValidationError);
  }
  {
    std::istringstream in(header + "1,A,do,5,2,2,4\n");
    CHECK_THROWS_AS(load_sap_table(in, Impact::political_manipulation), ValidationError);
  }
}

TEST_CASE("panel cost: any 4 forces 4, else the mean") {
  CHECK(panel_cost(std::vector{1.0, 2.0, 3.0}) == 2.0);
  CHECK(panel_cost(std::vector{1.0, 4.0, 1.0}) == 4.0);
  const std::string text =
      "id,stakeholder,action,cost_panel,priority,agreement,score\n"
      "1,A,do,1;4;2,2,2,4\n"
      "2,B,do,1;2,2,2,4\n";
  std::istringstream in(text);
  const SapTable t = load_sap_table(in, Impact::unemployment);
  CHECK(t.at(1).cost == 4.0);
  CHECK(t.at(1).nonviable);
  CHECK(t.at(2).cost == 1.5);
}

TEST_CASE("validate_bundle reports violations") {
  CHECK(validate_bundle(bundle()).ok());
  CHECK(validate_bundle(bundle()).tables.at(Impact::combined).saps == 62);

  DatasetBundle missing = bundle();
  missing.scenarios.erase(Impact::sensationalism);
  const ValidationReport r = validate_bundle(missing);
  CHECK_FALSE(r.ok());
  CHECK(std::any_of(r.violations.begin(), r.violations.end(), [](const std::string& v) {
    return v.find("scenario count 0 != 3") != std::string::npos;
  }));

  DatasetBundle tampered = bundle();
  tampered.tables.at(Impact::political_manipulation).saps[4].participatory_score = 99;
  const ValidationReport r2 = validate_bundle(tampered);
  CHECK_FALSE(r2.ok());
  CHECK(r2.violations.front().find("row 5") != std::string::npos);
}

TEST_CASE("load_bundle errors") {
  testing::TempDir dir;
  CHECK_THROWS_AS(load_bundle(dir.path()), IoError);

  testing::copy_data(dir / "data");
  CHECK(load_bundle(dir / "data").version == bundle().version);
  testing::write_file(dir / "data" / "saps_unemployment.csv",
                      "id,stakeholder,action,cost,priority,agreement,score\n1,A,do,x,2,2,4\n");
  CHECK_THROWS_AS(load_bundle(dir / "data"), ValidationError);
}

TEST_CASE("dataset version tracks content") {
  testing::TempDir dir;
  testing::copy_data(dir / "data");
  std::string text = testing::read_file(dir / "data" / "saps_unemployment.csv");
  text.replace(text.find("14.24"), 5, "14.23");
  testing::write_file(dir / "data" / "saps_unemployment.csv", text);
  CHECK(load_bundle(dir / "data").version != bundle().version);
}

#include "doctest.h"

#include <array>
#include <cstdio>
#include <sys/wait.h>

#include "json.hpp"

#include "polopt/manifest.hpp"
#include "support.hpp"

namespace {

struct Outcome {
  int code = -1;
  std::string out;
};

Outcome cli(const std::string& args) {
  const std::string cmd = std::string("'") + POLOPT_CLI_PATH + "' " + args + " 2>/dev/null";
  FILE* pipe = ::popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  Outcome o;
  std::array<char, 4096> buf{};
  while (const std::size_t n = std::fread(buf.data(), 1, buf.size(), pipe)) o.out.append(buf.data(), n);
  const int status = ::pclose(pipe);
  o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return o;
}

std::string quoted(const std::filesystem::path& p) { return "'" + p.string() + "'"; }

}  // namespace

TEST_CASE("validate on the shipped data") {
  const Outcome o = cli("validate");
  CHECK(o.code == 0);
  CHECK(o.out.find("political_manipulation") != std::string::npos);
  CHECK(o.out.find("feasible  22") != std::string::npos);
}

TEST_CASE("validate reports a corrupted row") {
  testing::TempDir dir;
  testing::copy_data(dir / "data");
  const auto csv = dir / "data" / "saps_political_manipulation.csv";
  std::string text = testing::read_file(csv);
  // Break the product rule on the first data row: score 19.74 -> 11.11.
  const auto pos = text.find("19.74");
  REQUIRE(pos != std::string::npos);
  text.replace(pos, 5, "11.11");
  testing::write_file(csv, text);
  const Outcome o = cli("--data " + quoted(dir / "data") + " validate");
  CHECK(o.code == 1);
}

TEST_CASE("missing data directory is an io error") {
  CHECK(cli("--data /nonexistent/polopt-data validate").code == 2);
}

TEST_CASE("run writes a manifest and replays byte for byte") {
  testing::TempDir dir;
  const std::string args = "run --impact political_manipulation --seed 5 --samples 200 --max-generations 20";
  const Outcome a = cli(args + " --out " + quoted(dir / "a"));
  const Outcome b = cli(args + " --out " + quoted(dir / "b"));
  REQUIRE(a.code == 0);
  REQUIRE(b.code == 0);
  CHECK(a.out.find("selected") != std::string::npos);
  const std::string ma = testing::read_file(dir / "a" / "manifest.json");
  CHECK_FALSE(ma.empty());
  CHECK(ma == testing::read_file(dir / "b" / "manifest.json"));
  CHECK(testing::read_file(dir / "a" / "generations.csv") ==
        testing::read_file(dir / "b" / "generations.csv"));
  const polopt::RunResult r = polopt::load_manifest(dir / "a" / "manifest.json");
  CHECK(r.gene_space.size() == 22);
  CHECK(r.population == 201);
}

TEST_CASE("beta zero uses the full table") {
  testing::TempDir dir;
  const Outcome o = cli("run --impact political_manipulation --alpha 1 --beta 0 --gamma 1 --samples 200 "
                        "--max-generations 5 --out " + quoted(dir / "r"));
  REQUIRE(o.code == 0);
  CHECK(polopt::load_manifest(dir / "r" / "manifest.json").gene_space.size() == 31);
}

TEST_CASE("config file with overrides") {
  testing::TempDir dir;
  testing::write_file(dir / "cfg.json",
                      R"({"impact": "unemployment", "seed": 3, "calibration_samples": 150, "max_generations": 8})");
  const Outcome o = cli("run --config " + quoted(dir / "cfg.json") + " --seed 4 --label mine --out " +
                        quoted(dir / "r"));
  REQUIRE(o.code == 0);
  const polopt::RunResult r = polopt::load_manifest(dir / "r" / "manifest.json");
  CHECK(r.config.impact == polopt::Impact::unemployment);
  CHECK(r.config.seed == 4);
  CHECK(r.config.label == "mine");
  CHECK(r.config.calibration_samples == 150);
}

TEST_CASE("bad configuration exits with the config code") {
  CHECK(cli("run --alpha 0 --beta 0 --gamma 0").code == 4);
  CHECK(cli("run --impact weather").code == 4);
  CHECK(cli("run --mutation 2").code == 4);
  CHECK(cli("run --population lots").code == 4);
  CHECK(cli("frobnicate").code == 4);
  CHECK(cli("--help").code == 0);
  testing::TempDir dir;
  testing::write_file(dir / "cfg.json", R"({"unknown_key": 1})");
  CHECK(cli("run --config " + quoted(dir / "cfg.json")).code == 4);
}

TEST_CASE("calibrate prints stats") {
  testing::TempDir dir;
  const Outcome o = cli("calibrate --impact sensationalism --samples 100 --stats " + quoted(dir / "s.json"));
  REQUIRE(o.code == 0);
  const auto j = nlohmann::json::parse(o.out);
  CHECK(j.at("sample_count") == 100);
  CHECK(std::filesystem::exists(dir / "s.json"));
}

TEST_CASE("heatmap over saved runs") {
  testing::TempDir dir;
  for (int s : {1, 2}) {
    REQUIRE(cli("run --seed " + std::to_string(s) + " --samples 100 --max-generations 5 --out " +
                quoted(dir / ("r" + std::to_string(s))))
                .code == 0);
  }
  const Outcome o = cli("heatmap " + quoted(dir / "r1") + " " + quoted(dir / "r2" / "manifest.json"));
  REQUIRE(o.code == 0);
  std::istringstream in(o.out);
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) ++lines;
  CHECK(lines == 4);
  CHECK(o.out.starts_with("run,1,2,"));
}

TEST_CASE("combined run spans the merged table") {
  testing::TempDir dir;
  const Outcome o = cli("combined --alpha 1 --beta 0 --gamma 1 --samples 100 --max-generations 5 --population 60 --out " +
                        quoted(dir / "c"));
  REQUIRE(o.code == 0);
  const polopt::RunResult r = polopt::load_manifest(dir / "c" / "manifest.json");
  CHECK(r.config.impact == polopt::Impact::combined);
  CHECK(r.gene_space.size() == 62);
}

TEST_CASE("sweep writes summaries") {
  testing::TempDir dir;
  testing::write_file(dir / "spec.json", R"({
    "impact": "unemployment", "repeats": 1,
    "base": {"calibration_samples": 100, "max_generations": 5},
    "rows": [{"label": "A", "alpha": 1, "beta": 1, "gamma": 1},
             {"label": "B", "alpha": 1, "beta": 0, "gamma": 0}]})");
  const Outcome o = cli("sweep " + quoted(dir / "spec.json") + " --jobs 2 --out " + quoted(dir / "out"));
  REQUIRE(o.code == 0);
  CHECK(std::filesystem::exists(dir / "out" / "summary.csv"));
  CHECK(std::filesystem::exists(dir / "out" / "heatmap.csv"));
  CHECK(std::filesystem::exists(dir / "out" / "a-r0" / "manifest.json"));
}

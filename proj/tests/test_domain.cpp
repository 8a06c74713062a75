#include "doctest.h"

#include <set>

#include "polopt/domain.hpp"
#include "polopt/error.hpp"
#include "polopt/rng.hpp"
#include "support.hpp"

using namespace polopt;

TEST_CASE("normalize_weights keeps unit-sum groups") {
  const WeightSet w = normalize_weights(0.34, 0.33, 0.33, 0.65, 0.35);
  CHECK(w.alpha == 0.34);
  CHECK(w.beta == 0.33);
  CHECK(w.gamma == 0.33);
  CHECK(w.w_s == 0.65);
  CHECK(w.w_m == 0.35);

  const WeightSet only_harm = normalize_weights(1, 0, 0, 0.65, 0.35);
  CHECK(only_harm == WeightSet{1, 0, 0, 0.65, 0.35});
}

TEST_CASE("normalize_weights rescales proportionally") {
  const WeightSet w = normalize_weights(2, 1, 1, 1, 1);
  CHECK(w.alpha == doctest::Approx(0.5));
  CHECK(w.beta == doctest::Approx(0.25));
  CHECK(w.gamma == doctest::Approx(0.25));
  CHECK(w.w_s == doctest::Approx(0.5));
  CHECK(w.w_m == doctest::Approx(0.5));
}

TEST_CASE("normalize_weights rejects zero groups and negatives") {
  CHECK_THROWS_WITH_AS(normalize_weights(0, 0, 0), doctest::Contains("alpha, beta, gamma"),
                       ValidationError);
  CHECK_THROWS_WITH_AS(normalize_weights(1, 0, 0, 0, 0), doctest::Contains("w_s, w_m"),
                       ValidationError);
  CHECK_THROWS_AS(normalize_weights(-1, 1, 1), ValidationError);
}

TEST_CASE("normalize_weights is idempotent") {
  Rng rng(11);
  for (int t = 0; t < 2000; ++t) {
    const WeightSet once = normalize_weights(rng.uniform01() + 1e-3, rng.uniform01(),
                                             rng.uniform01(), rng.uniform01() + 1e-3,
                                             rng.uniform01());
    const WeightSet twice = normalize_weights(once);
    CHECK(std::abs(twice.alpha - once.alpha) <= 1e-12);
    CHECK(std::abs(twice.beta - once.beta) <= 1e-12);
    CHECK(std::abs(twice.gamma - once.gamma) <= 1e-12);
    CHECK(std::abs(twice.w_s - once.w_s) <= 1e-12);
    CHECK(std::abs(twice.w_m - once.w_m) <= 1e-12);
  }
}

TEST_CASE("chromosome_from_ids on the feasible PM space") {
  const SapTable& pm = testing::bundle().tables.at(Impact::political_manipulation);
  const GeneSpacePtr space = build_gene_space(pm, 0.33);
  REQUIRE(space->size() == 22);

  const Chromosome c = chromosome_from_ids(std::vector{1, 2}, space);
  CHECK(c.bits().count() == 2);
  CHECK(c.bits().test(static_cast<std::size_t>(space->position(1))));
  CHECK(c.bits().test(static_cast<std::size_t>(space->position(2))));
  CHECK(c.selected_ids() == std::vector{1, 2});

  // SAP 7 is nonviable, so the feasible space does not contain it.
  CHECK(pm.at(7).nonviable);
  CHECK_THROWS_WITH_AS(chromosome_from_ids(std::vector{7}, space), doctest::Contains("7"),
                       ValidationError);
  CHECK_THROWS_AS(chromosome_from_ids(std::vector<int>{}, space), EmptySelectionError);
}

TEST_CASE("chromosome id round trip over every subset of a 10-gene space") {
  auto space = std::make_shared<GeneSpace>();
  space->ids = {3, 5, 8, 9, 12, 14, 20, 21, 25, 30};
  for (std::uint64_t v = 1; v < 1024; ++v) {
    std::vector<int> ids;
    for (std::size_t i = 0; i < 10; ++i) {
      if ((v >> i) & 1U) ids.push_back(space->ids[i]);
    }
    const Chromosome c = chromosome_from_ids(ids, space);
    REQUIRE(c.selected_ids() == ids);
    REQUIRE(c.bits() == BitVector::from_value(10, v));
  }
}

TEST_CASE("active_sap_count") {
  auto space = std::make_shared<GeneSpace>();
  for (int i = 1; i <= 22; ++i) space->ids.push_back(i);
  BitVector all(22);
  for (std::size_t i = 0; i < 22; ++i) all.set(i);
  CHECK(active_sap_count(Chromosome(all, space)) == 22);
  CHECK(active_sap_count(Chromosome(BitVector::from_value(22, 1U << 9), space)) == 1);

  auto six = std::make_shared<GeneSpace>();
  six->ids = {1, 2, 3, 4, 5, 6};
  CHECK(active_sap_count(Chromosome(BitVector::from_string("101010"), six)) == 3);
  CHECK_THROWS_AS(Chromosome(BitVector(6), six), EmptySelectionError);
  CHECK_THROWS_AS(Chromosome(BitVector::from_string("10101"), six), ValidationError);
}

TEST_CASE("validate_sap product rule and nonviable rule") {
  Sap s{.id = 1, .stakeholder = "Tech companies", .action = "act", .cost = 2, .priority = 2.82,
        .agreement = 7.0, .participatory_score = 19.74};
  CHECK_NOTHROW(validate_sap(s, true));
  s.participatory_score = 19.76;  // product 19.74, off by 0.02
  CHECK_THROWS_AS(validate_sap(s, true), ValidationError);
  CHECK_NOTHROW(validate_sap(s, false));

  Sap nv = s;
  nv.participatory_score = 19.74;
  nv.cost = 4.0;
  nv.nonviable = false;
  CHECK_THROWS_AS(validate_sap(nv, true), ValidationError);
  nv.nonviable = true;
  CHECK_NOTHROW(validate_sap(nv, true));
}

TEST_CASE("gene space construction") {
  const SapTable& pm = testing::bundle().tables.at(Impact::political_manipulation);
  CHECK(build_gene_space(pm, 0.0)->size() == 31);
  CHECK(build_gene_space(pm, 0.5)->size() == 22);

  CHECK_THROWS_AS(build_gene_space(pm, std::vector{1, 7}, 0.33), ConfigError);
  CHECK(build_gene_space(pm, std::vector{1, 7}, 0.0)->size() == 2);
  CHECK_THROWS_AS(build_gene_space(pm, std::vector{1, 99}, 0.0), ConfigError);
  CHECK_THROWS_AS(build_gene_space(pm, std::vector{1, 1}, 0.0), ConfigError);

  const GeneSpacePtr a = build_gene_space(pm, std::vector{1, 2, 3}, 0.0);
  const GeneSpacePtr b = build_gene_space(pm, std::vector{1, 2, 4}, 0.0);
  CHECK(a->hash() == build_gene_space(pm, std::vector{1, 2, 3}, 0.0)->hash());
  CHECK(a->hash() != b->hash());
}

TEST_CASE("impact names") {
  for (Impact i : {Impact::political_manipulation, Impact::unemployment, Impact::sensationalism,
                   Impact::combined}) {
    CHECK(parse_impact(to_string(i)) == i);
  }
  CHECK_THROWS_AS(parse_impact("weather"), ValidationError);
}

TEST_CASE("validate_config ranges") {
  RunConfig c;
  CHECK_NOTHROW(validate_config(c));
  RunConfig bad = c;
  bad.crossover_chance = 1.5;
  CHECK_THROWS_AS(validate_config(bad), ConfigError);
  bad = c;
  bad.mutation_chance = -0.1;
  CHECK_THROWS_AS(validate_config(bad), ConfigError);
  bad = c;
  bad.population_size = 3;  // elitism_k is 3
  CHECK_THROWS_AS(validate_config(bad), ConfigError);
  bad = c;
  bad.weights = {0, 0, 0, 0.65, 0.35};
  CHECK_THROWS_AS(validate_config(bad), ConfigError);
  bad = c;
  bad.evaluator.kind = "oracle";
  CHECK_THROWS_AS(validate_config(bad), ConfigError);
}

TEST_CASE("bit vector ordering and text form") {
  const BitVector a = BitVector::from_string("100");  // value 1
  const BitVector b = BitVector::from_string("010");  // value 2
  CHECK(a < b);
  CHECK(a.to_string() == "100");
  CHECK(BitVector::from_value(3, 6) == BitVector::from_string("011"));
  std::set<BitVector> seen;
  for (std::uint64_t v = 0; v < 64; ++v) seen.insert(BitVector::from_value(70, v));
  CHECK(seen.size() == 64);
  CHECK_THROWS(BitVector::from_string("10x"));
}

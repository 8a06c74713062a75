#include "doctest.h"

#include <cmath>

#include "polopt/cache.hpp"
#include "polopt/error.hpp"
#include "polopt/rng.hpp"
#include "polopt/surrogate.hpp"
#include "support.hpp"

using namespace polopt;

namespace {

// Closed form the surrogate must follow, written out independently.
double decayed(double base, double lambda, double total_strength) {
  return 1.0 + (base - 1.0) * std::exp(-lambda * total_strength);
}

std::vector<Sap> subset(const SapTable& t, std::uint64_t mask) {
  std::vector<Sap> out;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if ((mask >> i) & 1U) out.push_back(t.saps[i]);
  }
  return out;
}

const SapTable& pm() { return testing::bundle().tables.at(Impact::political_manipulation); }
const Scenario& pm_scenario(std::size_t k = 0) {
  return testing::bundle().scenarios.at(Impact::political_manipulation).at(k);
}

}  // namespace

TEST_CASE("decay formula reference value") {
  // 1 + 3 exp(-0.7)
  CHECK(decayed(4.0, 0.35, 2.0) == doctest::Approx(2.4897).epsilon(1e-4));
}

TEST_CASE("surrogate ratings follow the closed form") {
  SurrogateEvaluator ev;
  Rng rng(3);
  for (int t = 0; t < 200; ++t) {
    const std::uint64_t mask = 1 + rng.below((std::uint64_t{1} << 31) - 1);
    const std::vector<Sap> sel = subset(pm(), mask);
    const Scenario& s = pm_scenario(t % 3);
    const Scenario rw = ev.rewrite(s, sel);
    const ScenarioRatings r = ev.rate(rw);
    double total = 0.0;
    for (const Sap& sap : sel) total += ev.strength(Impact::political_manipulation, sap.id);
    const auto [sev, mag] = ev.base(s.id);
    CHECK(r.severity == doctest::Approx(decayed(sev, 0.35, total)).epsilon(1e-12));
    CHECK(r.magnitude == doctest::Approx(decayed(mag, 0.35, total)).epsilon(1e-12));
    CHECK(r.plausibility == 4.0);
  }
}

TEST_CASE("surrogate strengths and bases stay in range") {
  SurrogateEvaluator ev;
  for (const Sap& s : pm().saps) {
    const double st = ev.strength(Impact::political_manipulation, s.id);
    CHECK(st > 0.0);
    CHECK(st <= 0.6);
  }
  for (const Scenario& s : testing::bundle().scenarios.at(Impact::unemployment)) {
    const auto [sev, mag] = ev.base(s.id);
    CHECK(sev > 3.5);
    CHECK(sev <= 4.5);
    CHECK(mag > 3.5);
    CHECK(mag <= 4.5);
    const ScenarioRatings r = ev.rate(s);
    CHECK(r.severity == sev);
    CHECK(r.magnitude == mag);
  }
}

TEST_CASE("surrogate with a base override and the small-lambda limit") {
  SurrogateSettings st;
  st.base_overrides[pm_scenario().id] = {4.0, 3.0};
  st.lambda = 1e-12;
  SurrogateEvaluator ev(st);
  const ScenarioRatings r = ev.rate(ev.rewrite(pm_scenario(), pm().saps));
  CHECK(r.severity == doctest::Approx(4.0).epsilon(1e-9));
  CHECK(r.magnitude == doctest::Approx(3.0).epsilon(1e-9));
  CHECK(ev.id() != SurrogateEvaluator().id());
  CHECK(ev.id().find("/base=") != std::string::npos);
}

TEST_CASE("surrogate determinism") {
  SurrogateEvaluator a;
  SurrogateEvaluator b;
  Rng rng(99);
  for (int t = 0; t < 1000; ++t) {
    const std::vector<Sap> sel = subset(pm(), 1 + rng.below((std::uint64_t{1} << 31) - 1));
    const Scenario& s = pm_scenario(rng.below(3));
    const Scenario ra = a.rewrite(s, sel);
    const Scenario rb = b.rewrite(s, sel);
    REQUIRE(ra == rb);
    REQUIRE(a.rate(ra) == b.rate(rb));
    REQUIRE(a.rate(ra) == a.rate(ra));
  }
}

TEST_CASE("surrogate monotonicity: supersets never rate higher") {
  SurrogateEvaluator ev;
  Rng rng(17);
  const std::uint64_t full = (std::uint64_t{1} << 31) - 1;
  for (int t = 0; t < 500; ++t) {
    const std::uint64_t a = 1 + rng.below(full);
    const std::uint64_t b = a | rng.below(full + 1);
    const ScenarioRatings ra = ev.rate(ev.rewrite(pm_scenario(), subset(pm(), a)));
    const ScenarioRatings rb = ev.rate(ev.rewrite(pm_scenario(), subset(pm(), b)));
    CHECK(rb.severity <= ra.severity);
    CHECK(rb.magnitude <= ra.magnitude);
    if (b != a) CHECK(rb.severity < ra.severity);
  }
  // All SAPs strictly beat every proper subset of them.
  const ScenarioRatings all = ev.rate(ev.rewrite(pm_scenario(), pm().saps));
  for (std::size_t drop = 0; drop < pm().size(); ++drop) {
    const ScenarioRatings r = ev.rate(ev.rewrite(pm_scenario(), subset(pm(), full & ~(std::uint64_t{1} << drop))));
    CHECK(all.severity < r.severity);
  }
}

TEST_CASE("gate-triggering surrogate variant") {
  SurrogateSettings st;
  st.plausibility = 2.0;
  SurrogateEvaluator ev(st);
  CHECK(ev.rate(ev.rewrite(pm_scenario(), subset(pm(), 5))).plausibility == 2.0);
}

TEST_CASE("surrogate settings are validated") {
  SurrogateSettings st;
  st.lambda = 0;
  CHECK_THROWS_AS(SurrogateEvaluator{st}, ConfigError);
  st = {};
  st.strength_lo = 0.7;
  CHECK_THROWS_AS(SurrogateEvaluator{st}, ConfigError);
  st = {};
  st.base_overrides["x"] = {6.0, 2.0};
  CHECK_THROWS_AS(SurrogateEvaluator{st}, ConfigError);
}

TEST_CASE("surrogate ids depend on every parameter") {
  SurrogateSettings a, b;
  b.seed = 8;
  CHECK(SurrogateEvaluator(a).id() != SurrogateEvaluator(b).id());
  b = a;
  b.lambda = 0.36;
  CHECK(SurrogateEvaluator(a).id() != SurrogateEvaluator(b).id());
  b = a;
  b.plausibility = 2.0;
  CHECK(SurrogateEvaluator(a).id() != SurrogateEvaluator(b).id());
}

TEST_CASE("rewritten shell") {
  const std::vector<Sap> sel = {pm().at(5), pm().at(2), pm().at(5)};
  const Scenario rw = rewritten_shell(pm_scenario(), sel);
  CHECK(rw.kind == ScenarioKind::rewritten);
  CHECK(rw.parent_id == pm_scenario().id);
  CHECK(rw.policy == std::vector{2, 5});
  CHECK(rw.id == pm_scenario().id + "+2-5");
  CHECK_THROWS_AS(rewritten_shell(pm_scenario(), {}), EmptySelectionError);

  SurrogateEvaluator ev;
  CHECK(ev.rewrite(pm_scenario(), sel).body.starts_with("[policy: 2,5]\n"));
}

TEST_CASE("pearson correlation") {
  const std::vector<double> xs{1, 2, 3, 4.5, 7};
  std::vector<double> neg;
  for (double x : xs) neg.push_back(-x);
  CHECK(pearson_correlation(xs, xs) == doctest::Approx(1.0));
  CHECK(pearson_correlation(xs, neg) == doctest::Approx(-1.0));
  CHECK(pearson_correlation(std::vector{1.0, 2.0, 3.0}, std::vector{2.0, 4.0, 6.0}) ==
        doctest::Approx(1.0));
  // Hand-computed: x = (1,2,3), y = (1,3,2) gives r = 0.5.
  CHECK(pearson_correlation(std::vector{1.0, 2.0, 3.0}, std::vector{1.0, 3.0, 2.0}) ==
        doctest::Approx(0.5));
  CHECK_THROWS_AS(pearson_correlation(std::vector{1.0, 1.0}, std::vector{1.0, 2.0}), ValidationError);
  CHECK_THROWS_AS(pearson_correlation(std::vector{1.0}, std::vector{1.0}), ValidationError);
  CHECK_THROWS_AS(pearson_correlation(std::vector{1.0, 2.0}, std::vector{1.0}), ValidationError);
}

TEST_CASE("make_evaluator") {
  EvaluatorSettings s;
  EvaluatorPtr plain = make_evaluator(s);
  CHECK(dynamic_cast<SurrogateEvaluator*>(plain.get()) != nullptr);

  testing::TempDir dir;
  s.cache_path = (dir / "cache.jsonl").string();
  EvaluatorPtr cached = make_evaluator(s);
  CHECK(dynamic_cast<CachedEvaluator*>(cached.get()) != nullptr);
  CHECK(cached->id() == plain->id());

  s.kind = "bogus";
  CHECK_THROWS_AS(make_evaluator(s), ConfigError);
}

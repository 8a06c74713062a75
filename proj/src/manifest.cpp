#include "polopt/manifest.hpp"

#include <fmt/format.h>
#include <fstream>
#include <set>
#include <sstream>

#include "polopt/csv.hpp"
#include "polopt/error.hpp"
#include "polopt/fitness.hpp"

namespace polopt {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

// Reads optional keys from a JSON object and rejects keys nobody asked for.
class Fields {
 public:
  Fields(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(fmt::format("{}: expected an object", where_));
  }

  template <class T>
  bool get(const char* key, T& out) {
    if (!j_.contains(key)) return false;
    used_.insert(key);
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(fmt::format("{}.{}: {}", where_, key, e.what()));
    }
    return true;
  }

  const json* child(const char* key) {
    if (!j_.contains(key)) return nullptr;
    used_.insert(key);
    return &j_.at(key);
  }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!used_.contains(k)) throw ConfigError(fmt::format("{}: unknown key '{}'", where_, k));
    }
  }

  const std::string& where() const { return where_; }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> used_;
};

ordered_json surrogate_json(const SurrogateSettings& s) {
  ordered_json overrides = ordered_json::object();
  for (const auto& [id, sm] : s.base_overrides) overrides[id] = {sm.first, sm.second};
  return {{"seed", s.seed},
          {"lambda", s.lambda},
          {"strength_lo", s.strength_lo},
          {"strength_hi", s.strength_hi},
          {"plausibility", s.plausibility},
          {"base_overrides", overrides}};
}

ordered_json remote_json(const RemoteSettings& r) {
  ordered_json j{{"endpoint", r.endpoint},
                 {"path", r.path},
                 {"model", r.model},
                 {"api_key_env", r.api_key_env},
                 {"reasoning_effort", r.reasoning_effort}};
  j["temperature"] = r.temperature ? ordered_json(*r.temperature) : ordered_json(nullptr);
  j["max_concurrency"] = r.max_concurrency;
  j["rpm_budget"] = r.rpm_budget;
  j["max_retries"] = r.max_retries;
  j["backoff_base_s"] = r.backoff_base_s;
  j["timeout_s"] = r.timeout_s;
  j["jitter_seed"] = r.jitter_seed;
  j["prompt_version"] = r.prompt_version;
  j["severity_judges"] = r.severity_judges;
  j["magnitude_judges"] = r.magnitude_judges;
  j["plausibility_judges"] = r.plausibility_judges;
  return j;
}

SurrogateSettings surrogate_from(const json& j) {
  Fields f(j, "evaluator.surrogate");
  SurrogateSettings s;
  f.get("seed", s.seed);
  f.get("lambda", s.lambda);
  f.get("strength_lo", s.strength_lo);
  f.get("strength_hi", s.strength_hi);
  f.get("plausibility", s.plausibility);
  if (const json* o = f.child("base_overrides")) {
    if (!o->is_object()) throw ConfigError("evaluator.surrogate.base_overrides: expected an object");
    for (const auto& [id, v] : o->items()) {
      if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
        throw ConfigError(fmt::format(
            "evaluator.surrogate.base_overrides.{}: expected [severity, magnitude]", id));
      }
      s.base_overrides[id] = {v[0].get<double>(), v[1].get<double>()};
    }
  }
  f.finish();
  return s;
}

RemoteSettings remote_from(const json& j) {
  Fields f(j, "evaluator.remote");
  RemoteSettings r;
  f.get("endpoint", r.endpoint);
  f.get("path", r.path);
  f.get("model", r.model);
  f.get("api_key_env", r.api_key_env);
  f.get("reasoning_effort", r.reasoning_effort);
  if (const json* t = f.child("temperature")) {
    if (t->is_number()) {
      r.temperature = t->get<double>();
    } else if (!t->is_null()) {
      throw ConfigError("evaluator.remote.temperature: expected a number or null");
    }
  }
  f.get("max_concurrency", r.max_concurrency);
  f.get("rpm_budget", r.rpm_budget);
  f.get("max_retries", r.max_retries);
  f.get("backoff_base_s", r.backoff_base_s);
  f.get("timeout_s", r.timeout_s);
  f.get("jitter_seed", r.jitter_seed);
  f.get("prompt_version", r.prompt_version);
  f.get("severity_judges", r.severity_judges);
  f.get("magnitude_judges", r.magnitude_judges);
  f.get("plausibility_judges", r.plausibility_judges);
  f.finish();
  return r;
}

template <class T>
T strict(const json& j, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ValidationError(fmt::format("manifest: {}: {}", key, e.what()));
  }
}

FitnessBreakdown breakdown_from(const json& j) {
  FitnessBreakdown f;
  f.raw_sev_delta = strict<double>(j, "raw_sev_delta");
  f.raw_mag_delta = strict<double>(j, "raw_mag_delta");
  f.raw_cost = strict<double>(j, "raw_cost");
  f.raw_participatory = strict<double>(j, "raw_participatory");
  f.z_sev = strict<double>(j, "z_sev");
  f.z_mag = strict<double>(j, "z_mag");
  f.z_cost = strict<double>(j, "z_cost");
  f.z_participatory = strict<double>(j, "z_participatory");
  f.total = strict<double>(j, "total");
  f.gated = strict<bool>(j, "gated");
  return f;
}

std::string fmt_weight(double w) { return csv::format_number(w); }

}  // namespace

ordered_json to_json(const WeightSet& w) {
  return {{"alpha", w.alpha}, {"beta", w.beta}, {"gamma", w.gamma}, {"w_s", w.w_s}, {"w_m", w.w_m}};
}

ordered_json to_json(const EvaluatorSettings& e) {
  ordered_json j{{"kind", e.kind}, {"cache_path", e.cache_path}};
  if (e.kind == "remote") {
    j["remote"] = remote_json(e.remote);
  } else {
    j["surrogate"] = surrogate_json(e.surrogate);
  }
  return j;
}

ordered_json to_json(const RunConfig& c) {
  ordered_json j;
  j["label"] = c.label;
  j["impact"] = to_string(c.impact);
  j["weights"] = to_json(c.weights);
  j["seed"] = c.seed;
  j["population_size"] = c.population_size ? ordered_json(*c.population_size) : ordered_json("auto");
  j["crossover_chance"] = c.crossover_chance;
  j["mutation_chance"] = c.mutation_chance;
  j["elitism_k"] = c.elitism_k;
  j["stall_generations"] = c.stall_generations;
  j["max_generations"] = c.max_generations;
  j["plausibility_threshold"] = c.plausibility_threshold;
  j["calibration_samples"] = c.calibration_samples;
  j["population_cap"] = c.population_cap;
  j["workers"] = c.workers;
  j["gene_ids"] = c.gene_ids ? ordered_json(*c.gene_ids) : ordered_json(nullptr);
  j["evaluator"] = to_json(c.evaluator);
  return j;
}

ordered_json to_json(const GenerationRecord& g) {
  return {{"index", g.index},
          {"best_fitness", g.best_fitness},
          {"mean_fitness", g.mean_fitness},
          {"best_bits", g.best_bits.to_string()},
          {"evaluations_performed", g.evaluations_performed},
          {"cache_hits", g.cache_hits}};
}

ordered_json to_json(const FitnessBreakdown& f) {
  return {{"raw_sev_delta", f.raw_sev_delta},
          {"raw_mag_delta", f.raw_mag_delta},
          {"raw_cost", f.raw_cost},
          {"raw_participatory", f.raw_participatory},
          {"z_sev", f.z_sev},
          {"z_mag", f.z_mag},
          {"z_cost", f.z_cost},
          {"z_participatory", f.z_participatory},
          {"total", f.total},
          {"gated", f.gated}};
}

ordered_json to_json(const RunResult& r) {
  ordered_json j;
  j["schema"] = kManifestSchema;
  j["config"] = to_json(r.config);
  j["dataset_version"] = r.dataset_version;
  j["evaluator_id"] = r.stats.evaluator_id;
  j["gene_space"] = {{"impact", to_string(r.gene_space.impact)},
                     {"ids", r.gene_space.ids},
                     {"hash", r.gene_space.hash()}};
  j["population"] = r.population;
  j["stats"] = to_json(r.stats);
  j["stopped_reason"] = to_string(r.stopped_reason);
  j["best_bits"] = r.best_bits.to_string();
  j["selected_sap_ids"] = r.selected_sap_ids;
  j["best_breakdown"] = to_json(r.best_breakdown);
  ordered_json gens = ordered_json::array();
  for (const GenerationRecord& g : r.generations) gens.push_back(to_json(g));
  j["generations"] = std::move(gens);
  return j;
}

EvaluatorSettings evaluator_from_json(const json& j) {
  Fields f(j, "evaluator");
  EvaluatorSettings e;
  f.get("kind", e.kind);
  f.get("cache_path", e.cache_path);
  if (const json* s = f.child("surrogate")) e.surrogate = surrogate_from(*s);
  if (const json* r = f.child("remote")) e.remote = remote_from(*r);
  f.finish();
  if (e.kind != "surrogate" && e.kind != "remote") {
    throw ConfigError(fmt::format("evaluator.kind: unknown evaluator '{}'", e.kind));
  }
  return e;
}

RunConfig config_from_json(const json& j) {
  Fields f(j, "config");
  RunConfig c;
  f.get("label", c.label);
  std::string impact;
  if (f.get("impact", impact)) {
    try {
      c.impact = parse_impact(impact);
    } catch (const ValidationError& e) {
      throw ConfigError(e.what());
    }
  }
  if (const json* w = f.child("weights")) {
    Fields wf(*w, "config.weights");
    WeightSet raw;
    wf.get("alpha", raw.alpha);
    wf.get("beta", raw.beta);
    wf.get("gamma", raw.gamma);
    wf.get("w_s", raw.w_s);
    wf.get("w_m", raw.w_m);
    wf.finish();
    for (double v : {raw.alpha, raw.beta, raw.gamma, raw.w_s, raw.w_m}) {
      if (!(v >= 0.0)) throw ConfigError("config.weights: weights must be >= 0");
    }
    try {
      c.weights = normalize_weights(raw);
    } catch (const ValidationError& e) {
      throw ConfigError(e.what());
    }
  }
  f.get("seed", c.seed);
  if (const json* p = f.child("population_size")) {
    if (p->is_string() && p->get<std::string>() == "auto") {
      c.population_size.reset();
    } else if (p->is_number_integer()) {
      c.population_size = p->get<int>();
    } else if (!p->is_null()) {
      throw ConfigError("config.population_size: expected an integer or \"auto\"");
    }
  }
  f.get("crossover_chance", c.crossover_chance);
  f.get("mutation_chance", c.mutation_chance);
  f.get("elitism_k", c.elitism_k);
  f.get("stall_generations", c.stall_generations);
  f.get("max_generations", c.max_generations);
  f.get("plausibility_threshold", c.plausibility_threshold);
  f.get("calibration_samples", c.calibration_samples);
  f.get("population_cap", c.population_cap);
  f.get("workers", c.workers);
  if (const json* g = f.child("gene_ids")) {
    if (!g->is_null()) {
      try {
        c.gene_ids = g->get<std::vector<int>>();
      } catch (const json::exception& e) {
        throw ConfigError(fmt::format("config.gene_ids: {}", e.what()));
      }
    }
  }
  if (const json* e = f.child("evaluator")) c.evaluator = evaluator_from_json(*e);
  f.finish();
  validate_config(c);
  return c;
}

RunResult result_from_json(const json& j) {
  if (strict<int>(j, "schema") != kManifestSchema) {
    throw ValidationError("manifest: unsupported schema version");
  }
  RunResult r;
  try {
    r.config = config_from_json(j.at("config"));
  } catch (const json::exception& e) {
    throw ValidationError(fmt::format("manifest: config: {}", e.what()));
  }
  r.dataset_version = strict<std::string>(j, "dataset_version");
  const json& gs = j.at("gene_space");
  r.gene_space.impact = parse_impact(strict<std::string>(gs, "impact"));
  r.gene_space.ids = strict<std::vector<int>>(gs, "ids");
  if (strict<std::string>(gs, "hash") != r.gene_space.hash()) {
    throw ValidationError("manifest: gene space hash does not match its ids");
  }
  r.population = strict<int>(j, "population");
  try {
    r.stats = stats_from_json(j.at("stats"));
  } catch (const json::exception& e) {
    throw ValidationError(fmt::format("manifest: stats: {}", e.what()));
  }
  if (strict<std::string>(j, "evaluator_id") != r.stats.evaluator_id) {
    throw ValidationError("manifest: evaluator_id does not match stats");
  }
  const std::string reason = strict<std::string>(j, "stopped_reason");
  if (reason == "stall") {
    r.stopped_reason = StopReason::stall;
  } else if (reason == "max_generations") {
    r.stopped_reason = StopReason::max_generations;
  } else {
    throw ValidationError(fmt::format("manifest: unknown stopped_reason '{}'", reason));
  }
  r.best_bits = BitVector::from_string(strict<std::string>(j, "best_bits"));
  r.selected_sap_ids = strict<std::vector<int>>(j, "selected_sap_ids");
  r.best_breakdown = breakdown_from(j.at("best_breakdown"));
  for (const json& g : j.at("generations")) {
    GenerationRecord rec;
    rec.index = strict<int>(g, "index");
    rec.best_fitness = strict<double>(g, "best_fitness");
    rec.mean_fitness = strict<double>(g, "mean_fitness");
    rec.best_bits = BitVector::from_string(strict<std::string>(g, "best_bits"));
    rec.evaluations_performed = strict<int>(g, "evaluations_performed");
    rec.cache_hits = strict<int>(g, "cache_hits");
    r.generations.push_back(std::move(rec));
  }
  return r;
}

std::string manifest_text(const RunResult& r) { return to_json(r).dump(2) + "\n"; }

RunResult load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot read manifest {}", path.string()));
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError(fmt::format("manifest {}: {}", path.string(), e.what()));
  }
  try {
    return result_from_json(doc);
  } catch (const Error& e) {
    throw ValidationError(fmt::format("manifest {}: {}", path.string(), e.what()));
  } catch (const json::exception& e) {
    throw ValidationError(fmt::format("manifest {}: {}", path.string(), e.what()));
  }
}

void write_generations_csv(std::ostream& out, const RunResult& r) {
  csv::write_row(out, {"generation", "best_fitness", "mean_fitness", "best_bits", "evaluations",
                       "cache_hits"});
  for (const GenerationRecord& g : r.generations) {
    csv::write_row(out, {std::to_string(g.index), csv::format_number(g.best_fitness),
                         csv::format_number(g.mean_fitness), g.best_bits.to_string(),
                         std::to_string(g.evaluations_performed), std::to_string(g.cache_hits)});
  }
}

void write_run_artifacts(const fs::path& dir, const RunResult& r) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError(fmt::format("cannot create {}: {}", dir.string(), ec.message()));
  {
    std::ofstream out(dir / "manifest.json", std::ios::binary);
    out << manifest_text(r);
    if (!out) throw IoError(fmt::format("cannot write {}", (dir / "manifest.json").string()));
  }
  std::ofstream out(dir / "generations.csv", std::ios::binary);
  write_generations_csv(out, r);
  if (!out) throw IoError(fmt::format("cannot write {}", (dir / "generations.csv").string()));
}

std::string run_label(const RunResult& r) {
  const WeightSet& w = r.config.weights;
  const std::string name = r.config.label.empty()
                               ? fmt::format("a={} b={} g={}", fmt_weight(w.alpha),
                                             fmt_weight(w.beta), fmt_weight(w.gamma))
                               : r.config.label;
  return fmt::format("{} (seed {})", name, r.config.seed);
}

void write_heatmap(std::ostream& out, std::span<const RunResult> runs, const SapTable& table) {
  if (runs.empty()) throw ValidationError("heatmap: no runs");
  for (const RunResult& r : runs) {
    if (r.config.impact != table.impact) {
      throw ValidationError(fmt::format("heatmap: run '{}' is {} but the table is {}",
                                        run_label(r), to_string(r.config.impact),
                                        to_string(table.impact)));
    }
  }
  csv::Row header{"run"};
  csv::Row cost{"cost"};
  for (const Sap& s : table.saps) {
    header.push_back(std::to_string(s.id));
    cost.push_back(csv::format_number(s.cost));
  }
  csv::write_row(out, header);
  csv::write_row(out, cost);
  for (const RunResult& r : runs) {
    const std::set<int> chosen(r.selected_sap_ids.begin(), r.selected_sap_ids.end());
    csv::Row row{run_label(r)};
    for (const Sap& s : table.saps) row.push_back(chosen.contains(s.id) ? "1" : "0");
    csv::write_row(out, row);
  }
}

}  // namespace polopt

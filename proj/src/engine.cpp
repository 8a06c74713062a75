#include "polopt/engine.hpp"

#include <algorithm>
#include <fmt/format.h>
#include <fstream>

#include "json.hpp"

#include "polopt/error.hpp"
#include "polopt/ga.hpp"

namespace polopt {

namespace fs = std::filesystem;

std::string_view to_string(RunState s) {
  switch (s) {
    case RunState::queued: return "queued";
    case RunState::calibrating: return "calibrating";
    case RunState::evolving: return "evolving";
    case RunState::done: return "done";
    case RunState::failed: return "failed";
    case RunState::cancelled: return "cancelled";
  }
  return "unknown";
}

bool is_terminal(RunState s) {
  return s == RunState::done || s == RunState::failed || s == RunState::cancelled;
}

PopulationDefaults load_population_defaults(const fs::path& file) {
  PopulationDefaults out;
  if (!fs::exists(file)) return out;
  std::ifstream in(file);
  if (!in) throw IoError(fmt::format("cannot read {}", file.string()));
  try {
    const nlohmann::json doc = nlohmann::json::parse(in);
    for (const auto& [name, v] : doc.items()) {
      const int size = v.get<int>();
      if (size < 1) throw ConfigError(fmt::format("population default for {} must be >= 1", name));
      out[parse_impact(name)] = size;
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(fmt::format("{}: {}", file.string(), e.what()));
  } catch (const ValidationError& e) {
    throw ConfigError(fmt::format("{}: {}", file.string(), e.what()));
  }
  return out;
}

int resolve_population(const RunConfig& config, const GeneSpace& space, const SapTable& table,
                       const NormalizationStats& stats, const PopulationDefaults& defaults) {
  const std::size_t n = space.size();
  const std::uint64_t subsets =
      n >= 31 ? std::uint64_t{1} << 31 : (std::uint64_t{1} << n) - 1;
  const auto limit = static_cast<std::int64_t>(subsets);
  const std::int64_t floor_size = config.elitism_k + 1;

  if (config.population_size) {
    if (*config.population_size > limit) {
      throw ConfigError(fmt::format("population_size {} exceeds the {} nonempty subsets of {} genes",
                                    *config.population_size, subsets, n));
    }
    if (*config.population_size < floor_size) {
      throw ConfigError("population_size must exceed elitism_k");
    }
    return *config.population_size;
  }

  std::int64_t size;
  const auto it = defaults.find(config.impact);
  const bool default_space = !config.gene_ids && config.weights.beta > 0.0 &&
                             n == table.feasible_count();
  if (it != defaults.end() && default_space) {
    size = it->second;
  } else {
    size = population_size(static_cast<int>(n), std::max(1.0, stats.mean_active));
  }
  size = std::min<std::int64_t>({size, config.population_cap, limit});
  size = std::max(size, floor_size);
  if (size > limit) {
    throw ConfigError(fmt::format("elitism_k {} leaves no room in a {}-gene space",
                                  config.elitism_k, n));
  }
  return static_cast<int>(size);
}

RunSetup prepare_run(const RunConfig& config, const DatasetBundle& bundle) {
  validate_config(config);
  RunSetup s;
  s.table = table_for(bundle, config.impact);
  s.space = config.gene_ids ? build_gene_space(s.table, *config.gene_ids, config.weights.beta)
                            : build_gene_space(s.table, config.weights.beta);
  if (s.space->size() == 0) throw ConfigError("gene space is empty");
  s.scenarios = scenarios_for(bundle, config.impact);
  s.evaluator = make_evaluator(config.evaluator);
  return s;
}

NormalizationStats obtain_stats(const RunConfig& config, const FitnessContext& ctx,
                                const fs::path& stats_path, std::stop_token stop) {
  const std::string eval_id = ctx.evaluator_id();
  const std::string hash = ctx.space()->hash();
  if (!stats_path.empty()) {
    if (auto s = load_stats(stats_path, ctx.space()->impact, eval_id, hash,
                            config.calibration_samples)) {
      return *s;
    }
  }
  const std::uint64_t seed = calibration_seed(ctx.space()->impact, eval_id, hash);
  Calibration cal = calibrate(ctx, config.calibration_samples, seed, config.workers, stop);
  if (!stats_path.empty()) save_stats(stats_path, cal.stats);
  return cal.stats;
}

RunResult execute_run(const RunConfig& config, const DatasetBundle& bundle,
                      const EngineOptions& options, const EngineHooks& hooks) {
  auto state = [&](RunState s) {
    if (hooks.on_state) hooks.on_state(s);
  };
  RunSetup setup = prepare_run(config, bundle);
  state(RunState::calibrating);
  FitnessContext ctx(setup.table, setup.space, setup.scenarios, setup.evaluator,
                     config.plausibility_threshold, config.weights.beta);

  fs::path stats_path = options.stats_path;
  if (stats_path.empty() && !config.evaluator.cache_path.empty()) {
    stats_path = config.evaluator.cache_path + ".stats.json";
  }
  const NormalizationStats stats = obtain_stats(config, ctx, stats_path, hooks.stop);
  if (hooks.stop.stop_requested()) throw CancelledError();

  const int population = resolve_population(config, *setup.space, setup.table, stats,
                                            options.population_defaults);
  state(RunState::evolving);
  const WeightSet weights = config.weights;
  Objective objective = [&](const BitVector& bits) {
    return score(ctx.raw(bits), weights, stats);
  };
  EvolveHooks eh;
  eh.on_generation = hooks.on_generation;
  eh.stop = hooks.stop;
  EvolveResult ev = evolve(ga_params(config, static_cast<std::size_t>(population)),
                           setup.space->size(), objective, eh);
  if (ev.cancelled) throw CancelledError();

  RunResult r;
  r.config = config;
  r.stats = stats;
  r.dataset_version = bundle.version;
  r.gene_space = *setup.space;
  r.population = population;
  r.generations = std::move(ev.generations);
  r.best_bits = ev.best;
  r.best_breakdown = ev.best_fit;
  for (std::size_t i = 0; i < ev.best.size(); ++i) {
    if (ev.best.test(i)) r.selected_sap_ids.push_back(setup.space->ids[i]);
  }
  r.stopped_reason = ev.stopped_reason;
  state(RunState::done);
  return r;
}

}  // namespace polopt

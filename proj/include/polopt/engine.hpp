#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <stop_token>
#include <string_view>

#include "polopt/datasets.hpp"
#include "polopt/domain.hpp"
#include "polopt/fitness.hpp"

namespace polopt {

enum class RunState { queued, calibrating, evolving, done, failed, cancelled };
std::string_view to_string(RunState s);
bool is_terminal(RunState s);

using PopulationDefaults = std::map<Impact, int>;

// {"political_manipulation": 201, ...}. A missing file yields no defaults.
PopulationDefaults load_population_defaults(const std::filesystem::path& file);

struct EngineOptions {
  PopulationDefaults population_defaults;
  // Where calibration stats persist. Empty: "<cache_path>.stats.json" when the
  // evaluator has a cache, otherwise stats are not persisted.
  std::filesystem::path stats_path;
};

struct EngineHooks {
  std::function<void(RunState)> on_state;
  std::function<void(const GenerationRecord&)> on_generation;
  std::stop_token stop;
};

// Auto population: the per-impact default when the gene space is the impact's
// full feasible space, else the formula on the calibration mean_active. Always
// clamped to [elitism_k + 1, min(population_cap, 2^n - 1)].
int resolve_population(const RunConfig& config, const GeneSpace& space, const SapTable& table,
                       const NormalizationStats& stats, const PopulationDefaults& defaults);

struct RunSetup {
  SapTable table;
  GeneSpacePtr space;
  std::vector<Scenario> scenarios;
  EvaluatorPtr evaluator;
};

RunSetup prepare_run(const RunConfig& config, const DatasetBundle& bundle);

// Loads stats for the context's key from the stats file or calibrates and
// stores them.
NormalizationStats obtain_stats(const RunConfig& config, const FitnessContext& ctx,
                                const std::filesystem::path& stats_path,
                                std::stop_token stop = {});

// Calibrate, evolve and assemble a RunResult. Throws CancelledError when the
// stop token fires; generations seen so far were delivered through hooks.
RunResult execute_run(const RunConfig& config, const DatasetBundle& bundle,
                      const EngineOptions& options = {}, const EngineHooks& hooks = {});

}  // namespace polopt

#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>

#include "json.hpp"

#include "polopt/domain.hpp"

namespace polopt {

inline constexpr int kManifestSchema = 1;

nlohmann::ordered_json to_json(const WeightSet& w);
nlohmann::ordered_json to_json(const EvaluatorSettings& e);
nlohmann::ordered_json to_json(const RunConfig& c);
nlohmann::ordered_json to_json(const GenerationRecord& g);
nlohmann::ordered_json to_json(const FitnessBreakdown& f);
nlohmann::ordered_json to_json(const RunResult& r);

// Missing keys take defaults; unknown keys, wrong types and invalid values
// raise ConfigError. Weight groups are normalized.
RunConfig config_from_json(const nlohmann::json& j);
EvaluatorSettings evaluator_from_json(const nlohmann::json& j);
RunResult result_from_json(const nlohmann::json& j);

// Canonical manifest text: ordered keys, two-space indent, trailing newline.
std::string manifest_text(const RunResult& r);
RunResult load_manifest(const std::filesystem::path& path);

// generation,best_fitness,mean_fitness,best_bits,evaluations,cache_hits
void write_generations_csv(std::ostream& out, const RunResult& r);

// Writes manifest.json and generations.csv into dir (created if needed).
void write_run_artifacts(const std::filesystem::path& dir, const RunResult& r);

// Row label used in heatmaps and summaries: the config label (or the weight
// triple when unlabeled) plus the seed.
std::string run_label(const RunResult& r);

// Header "run,<SAP ids in table order>", a "cost" row, then one 0/1 row per
// run. Throws ValidationError on an empty list or mixed impacts.
void write_heatmap(std::ostream& out, std::span<const RunResult> runs, const SapTable& table);

}  // namespace polopt

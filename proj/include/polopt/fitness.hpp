#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stop_token>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "polopt/domain.hpp"
#include "polopt/evaluator.hpp"

namespace polopt {

struct RawComponents {
  double sev_delta_avg = 0.0;
  double mag_delta_avg = 0.0;
  double cost_total = 0.0;
  double participatory_avg = 0.0;
  bool gated = false;

  bool operator==(const RawComponents&) const = default;
};

using RatedScenario = std::pair<Scenario, ScenarioRatings>;

struct HarmComponents {
  double sev_delta_avg = 0.0;
  double mag_delta_avg = 0.0;
  bool gated = false;
};

// Mean severity/magnitude drop from each original to its rewrite. rewrites[k]
// must have parent_id == originals[k].id. gated is set when any rewrite has
// plausibility below threshold; the deltas are still reported.
HarmComponents harm_components(std::span<const RatedScenario> originals,
                               std::span<const RatedScenario> rewrites, double threshold);

// Sum of costs over the selection. With beta > 0 a nonviable SAP in the
// selection is a ConfigError.
double cost_component(const SapTable& table, const Chromosome& c, double beta = 0.0);
// Mean participatory score over the selection.
double participatory_component(const SapTable& table, const Chromosome& c);

// Everything needed to turn a bit vector into raw components: the table, the
// gene space, the original scenarios (rated once at construction) and the
// evaluator. Safe to share across threads.
class FitnessContext {
 public:
  FitnessContext(SapTable table, GeneSpacePtr space, std::vector<Scenario> originals,
                 EvaluatorPtr evaluator, double plausibility_threshold, double beta);

  RawComponents raw(const BitVector& bits) const;

  const SapTable& table() const noexcept { return table_; }
  const GeneSpacePtr& space() const noexcept { return space_; }
  const std::vector<RatedScenario>& originals() const noexcept { return originals_; }
  const EvaluatorPtr& evaluator() const noexcept { return evaluator_; }
  std::string evaluator_id() const { return evaluator_->id(); }

 private:
  SapTable table_;
  GeneSpacePtr space_;
  std::vector<RatedScenario> originals_;
  EvaluatorPtr evaluator_;
  double threshold_;
  double beta_;
  std::vector<const Sap*> gene_saps_;
};

// Weighted sum of z-scored components. Gated input yields the sentinel.
FitnessBreakdown score(const RawComponents& raw, const WeightSet& weights,
                       const NormalizationStats& stats);

FitnessBreakdown fitness(const FitnessContext& ctx, const Chromosome& c, const WeightSet& weights,
                         const NormalizationStats& stats);

// Population mean and sd (divisor n).
VariableStats describe(std::span<const double> values);

struct Calibration {
  NormalizationStats stats;
  std::vector<BitVector> chromosomes;
  std::vector<RawComponents> samples;
};

// Draws `samples` unique nonempty chromosomes uniformly and computes their
// components. Throws ValidationError when the gene space has fewer than
// `samples` nonempty subsets or a variable has zero variance.
Calibration calibrate(const FitnessContext& ctx, int samples, std::uint64_t seed,
                      int workers = 1, std::stop_token stop = {});

// Seed for the calibration sample of a stats key, so that stored stats are a
// function of their key alone.
std::uint64_t calibration_seed(Impact impact, std::string_view evaluator_id,
                               std::string_view gene_space_hash);

std::string stats_key(const NormalizationStats& stats);
nlohmann::ordered_json to_json(const NormalizationStats& stats);
NormalizationStats stats_from_json(const nlohmann::json& j);

// Stats file: {"<impact>|<evaluator id>|<gene space hash>": stats, ...}.
std::optional<NormalizationStats> load_stats(const std::filesystem::path& file, Impact impact,
                                             std::string_view evaluator_id,
                                             std::string_view gene_space_hash,
                                             int sample_count);
void save_stats(const std::filesystem::path& file, const NormalizationStats& stats);

}  // namespace polopt

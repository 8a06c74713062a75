#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "polopt/bitvec.hpp"

namespace polopt {

enum class Impact {
  political_manipulation,
  unemployment,
  sensationalism,
  combined,
};

inline constexpr Impact kSingleImpacts[] = {
    Impact::political_manipulation, Impact::unemployment, Impact::sensationalism};

std::string_view to_string(Impact impact);
std::string_view display_name(Impact impact);
// Short table prefix used in overlap source ids ("PM", "LU", "MS").
std::string_view source_prefix(Impact impact);
// Throws ValidationError on unknown names.
Impact parse_impact(std::string_view name);

// A stakeholder-action pair: one policy option with its expert cost and
// participatory rating.
struct Sap {
  int id = 0;
  std::string stakeholder;
  std::string action;
  double cost = 1.0;         // panel average, 4.0 == nonviable
  double priority = 1.0;     // [1, 3]
  double agreement = 1.0;    // [1, 7]
  double participatory_score = 1.0;  // [1, 21], priority x agreement
  bool nonviable = false;

  // Long-form phrasing used in rewrite prompts; empty means use the short form.
  std::string stakeholder_full;
  std::string action_full;
  // Source rows for merged overlap entries, e.g. {"PM2", "MS1"}.
  std::vector<std::string> sources;

  bool operator==(const Sap&) const = default;
};

// Checks ranges and the nonviable <=> cost == 4 rule. When check_product is
// set, also requires |score - priority * agreement| <= 0.01.
void validate_sap(const Sap& sap, bool check_product);

struct SapTable {
  Impact impact = Impact::political_manipulation;
  std::vector<Sap> saps;

  std::size_t size() const noexcept { return saps.size(); }
  std::size_t feasible_count() const noexcept;
  std::size_t nonviable_count() const noexcept { return size() - feasible_count(); }
  // nullptr when absent.
  const Sap* find(int id) const noexcept;
  const Sap& at(int id) const;

  bool operator==(const SapTable&) const = default;
};

// Ordered list of SAP ids that chromosome bits index.
struct GeneSpace {
  Impact impact = Impact::political_manipulation;
  std::vector<int> ids;

  std::size_t size() const noexcept { return ids.size(); }
  // Position of id, or -1.
  int position(int id) const noexcept;
  std::string hash() const;

  bool operator==(const GeneSpace&) const = default;
};

using GeneSpacePtr = std::shared_ptr<const GeneSpace>;

// Feasible SAPs only when beta > 0, every SAP otherwise.
GeneSpacePtr build_gene_space(const SapTable& table, double beta);
// Explicit subset of ids; rejects unknown ids, and nonviable ids when beta > 0.
GeneSpacePtr build_gene_space(const SapTable& table, std::span<const int> ids, double beta);

// A nonempty selection of SAPs over a gene space.
class Chromosome {
 public:
  Chromosome(BitVector bits, GeneSpacePtr space);

  const BitVector& bits() const noexcept { return bits_; }
  const GeneSpacePtr& space() const noexcept { return space_; }
  std::vector<int> selected_ids() const;

  bool operator==(const Chromosome& other) const { return bits_ == other.bits_; }

 private:
  BitVector bits_;
  GeneSpacePtr space_;
};

Chromosome chromosome_from_ids(std::span<const int> ids, GeneSpacePtr space);
std::size_t active_sap_count(const Chromosome& c);

struct WeightSet {
  double alpha = 0.34;
  double beta = 0.33;
  double gamma = 0.33;
  double w_s = 0.65;
  double w_m = 0.35;

  bool operator==(const WeightSet&) const = default;
};

// Rescales (alpha, beta, gamma) and (w_s, w_m) to sum to one.
WeightSet normalize_weights(double alpha, double beta, double gamma, double w_s = 0.65,
                            double w_m = 0.35);
inline WeightSet normalize_weights(const WeightSet& w) {
  return normalize_weights(w.alpha, w.beta, w.gamma, w.w_s, w.w_m);
}

enum class ScenarioKind { original, rewritten };

struct Scenario {
  std::string id;
  Impact impact = Impact::political_manipulation;
  std::string body;
  ScenarioKind kind = ScenarioKind::original;
  std::optional<std::string> parent_id;
  // Sorted SAP ids of the policy a rewritten scenario was written under.
  std::vector<int> policy;

  bool operator==(const Scenario&) const = default;
};

struct ScenarioRatings {
  double severity = 1.0;
  double magnitude = 1.0;
  double plausibility = 1.0;

  bool operator==(const ScenarioRatings&) const = default;
};

struct VariableStats {
  double mean = 0.0;
  double sd = 1.0;
  bool operator==(const VariableStats&) const = default;
};

struct NormalizationStats {
  VariableStats severity;
  VariableStats magnitude;
  VariableStats cost;
  VariableStats participatory;
  std::size_t sample_count = 0;
  double mean_active = 0.0;  // mean set-bit count over the calibration sample
  Impact impact = Impact::political_manipulation;
  std::string evaluator_id;
  std::string gene_space_hash;

  bool operator==(const NormalizationStats&) const = default;
};

inline constexpr double kGatedFitness = -1e18;

struct FitnessBreakdown {
  double raw_sev_delta = 0.0;
  double raw_mag_delta = 0.0;
  double raw_cost = 0.0;
  double raw_participatory = 0.0;
  double z_sev = 0.0;
  double z_mag = 0.0;
  double z_cost = 0.0;
  double z_participatory = 0.0;
  double total = kGatedFitness;
  bool gated = true;

  bool operator==(const FitnessBreakdown&) const = default;
};

struct SurrogateSettings {
  std::uint64_t seed = 7;
  double lambda = 0.35;
  double strength_lo = 0.0;
  double strength_hi = 0.6;
  double plausibility = 4.0;
  // Per-scenario (severity, magnitude) of the original.
  std::map<std::string, std::pair<double, double>> base_overrides;

  bool operator==(const SurrogateSettings&) const = default;
};

struct RemoteSettings {
  std::string endpoint;  // base URL, e.g. https://host:port
  std::string path = "/v1/chat/completions";
  std::string model;
  std::string api_key_env = "POLOPT_API_KEY";
  std::string reasoning_effort;  // empty => omitted
  std::optional<double> temperature;
  int max_concurrency = 4;
  int rpm_budget = 60;
  int max_retries = 5;
  double backoff_base_s = 2.0;
  double timeout_s = 120.0;
  std::uint64_t jitter_seed = 0;
  std::string prompt_version = "v1";
  // Judges (1..5) averaged per dimension.
  std::vector<int> severity_judges{1, 2, 3, 4, 5};
  std::vector<int> magnitude_judges{1, 2, 3, 4, 5};
  std::vector<int> plausibility_judges{1, 2, 3, 4, 5};

  bool operator==(const RemoteSettings&) const = default;
};

struct EvaluatorSettings {
  std::string kind = "surrogate";  // surrogate | remote
  SurrogateSettings surrogate;
  RemoteSettings remote;
  std::string cache_path;  // empty => no persistent cache

  bool operator==(const EvaluatorSettings&) const = default;
};

struct RunConfig {
  std::string label;  // free text, e.g. a weight-row name
  Impact impact = Impact::political_manipulation;
  WeightSet weights;
  std::uint64_t seed = 0;
  std::optional<int> population_size;  // nullopt == auto
  double crossover_chance = 0.80;
  double mutation_chance = 0.03;
  int elitism_k = 3;
  int stall_generations = 10;
  int max_generations = 1000;
  double plausibility_threshold = 3.0;
  int calibration_samples = 1000;
  int population_cap = 1000;  // ceiling applied to the population formula
  int workers = 1;            // concurrent chromosome evaluations
  std::optional<std::vector<int>> gene_ids;  // restrict the gene space
  EvaluatorSettings evaluator;

  bool operator==(const RunConfig&) const = default;
};

// Throws ConfigError when a probability, count or weight is out of range.
void validate_config(const RunConfig& config);

struct GenerationRecord {
  int index = 0;
  double best_fitness = 0.0;
  double mean_fitness = 0.0;
  BitVector best_bits;
  int evaluations_performed = 0;
  int cache_hits = 0;

  bool operator==(const GenerationRecord&) const = default;
};

enum class StopReason { stall, max_generations };
std::string_view to_string(StopReason r);

struct RunResult {
  RunConfig config;
  NormalizationStats stats;
  std::string dataset_version;
  GeneSpace gene_space;
  int population = 0;  // size actually used
  std::vector<GenerationRecord> generations;
  BitVector best_bits;
  FitnessBreakdown best_breakdown;
  std::vector<int> selected_sap_ids;
  StopReason stopped_reason = StopReason::stall;

  bool operator==(const RunResult&) const = default;
};

}  // namespace polopt

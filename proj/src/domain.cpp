#include "polopt/domain.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <set>

#include "polopt/error.hpp"
#include "polopt/rng.hpp"

namespace polopt {

std::string_view to_string(Impact impact) {
  switch (impact) {
    case Impact::political_manipulation: return "political_manipulation";
    case Impact::unemployment: return "unemployment";
    case Impact::sensationalism: return "sensationalism";
    case Impact::combined: return "combined";
  }
  return "unknown";
}

std::string_view display_name(Impact impact) {
  switch (impact) {
    case Impact::political_manipulation: return "political manipulation";
    case Impact::unemployment: return "unemployment";
    case Impact::sensationalism: return "media sensationalism";
    case Impact::combined: return "combined impacts";
  }
  return "unknown";
}

std::string_view source_prefix(Impact impact) {
  switch (impact) {
    case Impact::political_manipulation: return "PM";
    case Impact::unemployment: return "LU";
    case Impact::sensationalism: return "MS";
    case Impact::combined: return "CB";
  }
  return "??";
}

Impact parse_impact(std::string_view name) {
  for (Impact i : {Impact::political_manipulation, Impact::unemployment,
                   Impact::sensationalism, Impact::combined}) {
    if (name == to_string(i) || name == source_prefix(i)) return i;
  }
  throw ValidationError(fmt::format("unknown impact type '{}'", name));
}

std::string_view to_string(StopReason r) {
  return r == StopReason::stall ? "stall" : "max_generations";
}

namespace {

void check_range(const Sap& sap, std::string_view field, double v, double lo, double hi) {
  if (!(v >= lo && v <= hi)) {
    throw ValidationError(
        fmt::format("SAP {}: {} {} outside [{}, {}]", sap.id, field, v, lo, hi));
  }
}

}  // namespace

void validate_sap(const Sap& sap, bool check_product) {
  if (sap.id <= 0) throw ValidationError(fmt::format("SAP id {} must be positive", sap.id));
  if (sap.stakeholder.empty() || sap.action.empty()) {
    throw ValidationError(fmt::format("SAP {}: empty stakeholder or action", sap.id));
  }
  check_range(sap, "cost", sap.cost, 1.0, 4.0);
  check_range(sap, "priority", sap.priority, 1.0, 3.0);
  check_range(sap, "agreement", sap.agreement, 1.0, 7.0);
  check_range(sap, "score", sap.participatory_score, 1.0, 21.0);
  if (sap.nonviable != (sap.cost == 4.0)) {
    throw ValidationError(
        fmt::format("SAP {}: nonviable flag must match cost == 4 (cost {})", sap.id, sap.cost));
  }
  if (check_product) {
    const double product = sap.priority * sap.agreement;
    if (std::abs(sap.participatory_score - product) > 0.01) {
      throw ValidationError(fmt::format(
          "SAP {}: score {} differs from priority x agreement {:.4f} by more than 0.01", sap.id,
          sap.participatory_score, product));
    }
  }
}

std::size_t SapTable::feasible_count() const noexcept {
  return static_cast<std::size_t>(
      std::count_if(saps.begin(), saps.end(), [](const Sap& s) { return !s.nonviable; }));
}

const Sap* SapTable::find(int id) const noexcept {
  auto it = std::find_if(saps.begin(), saps.end(), [id](const Sap& s) { return s.id == id; });
  return it == saps.end() ? nullptr : &*it;
}

const Sap& SapTable::at(int id) const {
  if (const Sap* s = find(id)) return *s;
  throw ValidationError(fmt::format("unknown SAP id {} in {} table", id, to_string(impact)));
}

int GeneSpace::position(int id) const noexcept {
  auto it = std::find(ids.begin(), ids.end(), id);
  return it == ids.end() ? -1 : static_cast<int>(it - ids.begin());
}

std::string GeneSpace::hash() const {
  std::string key(to_string(impact));
  for (int id : ids) key += fmt::format(",{}", id);
  return fmt::format("{:016x}", fnv1a(key));
}

GeneSpacePtr build_gene_space(const SapTable& table, double beta) {
  auto space = std::make_shared<GeneSpace>();
  space->impact = table.impact;
  for (const Sap& s : table.saps) {
    if (beta > 0.0 && s.nonviable) continue;
    space->ids.push_back(s.id);
  }
  return space;
}

GeneSpacePtr build_gene_space(const SapTable& table, std::span<const int> ids, double beta) {
  auto space = std::make_shared<GeneSpace>();
  space->impact = table.impact;
  std::set<int> seen;
  for (int id : ids) {
    const Sap* s = table.find(id);
    if (s == nullptr) {
      throw ConfigError(fmt::format("gene space: unknown SAP id {} in {} table", id,
                                    to_string(table.impact)));
    }
    if (beta > 0.0 && s->nonviable) {
      throw ConfigError(fmt::format(
          "gene space: SAP {} is nonviable and cannot be searched when beta > 0", id));
    }
    if (!seen.insert(id).second) {
      throw ConfigError(fmt::format("gene space: duplicate SAP id {}", id));
    }
    space->ids.push_back(id);
  }
  if (space->ids.empty()) throw ConfigError("gene space is empty");
  return space;
}

Chromosome::Chromosome(BitVector bits, GeneSpacePtr space)
    : bits_(std::move(bits)), space_(std::move(space)) {
  if (!space_) throw ValidationError("chromosome requires a gene space");
  if (bits_.size() != space_->size()) {
    throw ValidationError(fmt::format("chromosome length {} does not match gene space size {}",
                                      bits_.size(), space_->size()));
  }
  if (bits_.none()) throw EmptySelectionError();
}

std::vector<int> Chromosome::selected_ids() const {
  std::vector<int> out;
  for (std::size_t i = 0; i < bits_.size(); ++i) {
    if (bits_.test(i)) out.push_back(space_->ids[i]);
  }
  return out;
}

Chromosome chromosome_from_ids(std::span<const int> ids, GeneSpacePtr space) {
  if (ids.empty()) throw EmptySelectionError();
  BitVector bits(space->size());
  for (int id : ids) {
    const int pos = space->position(id);
    if (pos < 0) {
      throw ValidationError(fmt::format("unknown SAP id {} for this gene space", id));
    }
    bits.set(static_cast<std::size_t>(pos));
  }
  return Chromosome(std::move(bits), std::move(space));
}

std::size_t active_sap_count(const Chromosome& c) { return c.bits().count(); }

WeightSet normalize_weights(double alpha, double beta, double gamma, double w_s, double w_m) {
  for (double v : {alpha, beta, gamma, w_s, w_m}) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw ValidationError("weights must be finite and nonnegative");
    }
  }
  const double outer = alpha + beta + gamma;
  if (outer <= 0.0) throw ValidationError("weight group (alpha, beta, gamma) sums to zero");
  const double inner = w_s + w_m;
  if (inner <= 0.0) throw ValidationError("weight group (w_s, w_m) sums to zero");
  // Groups already summing to 1 are kept verbatim so repeated normalization is
  // exact.
  WeightSet w{alpha, beta, gamma, w_s, w_m};
  if (std::abs(outer - 1.0) > 1e-12) {
    w.alpha /= outer;
    w.beta /= outer;
    w.gamma /= outer;
  }
  if (std::abs(inner - 1.0) > 1e-12) {
    w.w_s /= inner;
    w.w_m /= inner;
  }
  return w;
}

void validate_config(const RunConfig& c) {
  auto prob = [](double p, std::string_view name) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError(fmt::format("{} {} outside [0, 1]", name, p));
  };
  prob(c.crossover_chance, "crossover_chance");
  prob(c.mutation_chance, "mutation_chance");
  if (c.elitism_k < 0) throw ConfigError("elitism_k must be >= 0");
  if (c.population_size && *c.population_size < 1) {
    throw ConfigError("population_size must be >= 1");
  }
  if (c.population_size && c.elitism_k >= *c.population_size) {
    throw ConfigError("elitism_k must be smaller than population_size");
  }
  if (c.stall_generations < 1) throw ConfigError("stall_generations must be >= 1");
  if (c.max_generations < 1) throw ConfigError("max_generations must be >= 1");
  if (c.calibration_samples < 2) throw ConfigError("calibration_samples must be >= 2");
  if (c.population_cap < 1) throw ConfigError("population_cap must be >= 1");
  if (c.workers < 1) throw ConfigError("workers must be >= 1");
  if (c.evaluator.kind != "surrogate" && c.evaluator.kind != "remote") {
    throw ConfigError(fmt::format("unknown evaluator '{}'", c.evaluator.kind));
  }
  try {
    normalize_weights(c.weights);
  } catch (const ValidationError& e) {
    throw ConfigError(e.what());
  }
}

}  // namespace polopt

#include "polopt/fitness.hpp"

#include <cmath>
#include <fmt/format.h>
#include <fstream>
#include <mutex>

#include "polopt/error.hpp"
#include "polopt/ga.hpp"
#include "polopt/parallel.hpp"
#include "polopt/rng.hpp"

namespace polopt {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

HarmComponents harm_components(std::span<const RatedScenario> originals,
                               std::span<const RatedScenario> rewrites, double threshold) {
  if (originals.empty()) throw ValidationError("harm: no scenarios");
  if (originals.size() != rewrites.size()) {
    throw ValidationError(fmt::format("harm: {} originals but {} rewrites", originals.size(),
                                      rewrites.size()));
  }
  HarmComponents out;
  for (std::size_t k = 0; k < originals.size(); ++k) {
    const auto& [orig, r0] = originals[k];
    const auto& [rew, r1] = rewrites[k];
    if (!rew.parent_id || *rew.parent_id != orig.id) {
      throw ValidationError(fmt::format("harm: rewrite {} is not aligned with scenario {}",
                                        rew.parent_id.value_or(rew.id), orig.id));
    }
    out.sev_delta_avg += r0.severity - r1.severity;
    out.mag_delta_avg += r0.magnitude - r1.magnitude;
    if (r1.plausibility < threshold) out.gated = true;
  }
  const double n = static_cast<double>(originals.size());
  out.sev_delta_avg /= n;
  out.mag_delta_avg /= n;
  return out;
}

double cost_component(const SapTable& table, const Chromosome& c, double beta) {
  double total = 0.0;
  for (int id : c.selected_ids()) {
    const Sap& s = table.at(id);
    if (beta > 0.0 && s.nonviable) {
      throw ConfigError(fmt::format("SAP {} is nonviable and cannot be selected when beta > 0", id));
    }
    total += s.cost;
  }
  return total;
}

double participatory_component(const SapTable& table, const Chromosome& c) {
  const std::vector<int> ids = c.selected_ids();
  if (ids.empty()) throw EmptySelectionError();
  double total = 0.0;
  for (int id : ids) total += table.at(id).participatory_score;
  return total / static_cast<double>(ids.size());
}

FitnessContext::FitnessContext(SapTable table, GeneSpacePtr space, std::vector<Scenario> originals,
                               EvaluatorPtr evaluator, double plausibility_threshold, double beta)
    : table_(std::move(table)),
      space_(std::move(space)),
      evaluator_(std::move(evaluator)),
      threshold_(plausibility_threshold),
      beta_(beta) {
  if (!space_) throw ConfigError("fitness: no gene space");
  if (!evaluator_) throw ConfigError("fitness: no evaluator");
  if (originals.empty()) throw ValidationError("fitness: no scenarios");
  for (int id : space_->ids) {
    const Sap& s = table_.at(id);
    if (beta_ > 0.0 && s.nonviable) {
      throw ConfigError(fmt::format("gene space contains nonviable SAP {} while beta > 0", id));
    }
    gene_saps_.push_back(&s);
  }
  originals_.reserve(originals.size());
  for (Scenario& s : originals) {
    ScenarioRatings r = evaluator_->rate(s);
    originals_.emplace_back(std::move(s), r);
  }
}

RawComponents FitnessContext::raw(const BitVector& bits) const {
  if (bits.size() != gene_saps_.size()) {
    throw ValidationError(fmt::format("chromosome length {} != gene space size {}", bits.size(),
                                      gene_saps_.size()));
  }
  std::vector<Sap> selected;
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (bits.test(i)) selected.push_back(*gene_saps_[i]);
  }
  if (selected.empty()) throw EmptySelectionError();

  RawComponents out;
  for (const Sap& s : selected) {
    out.cost_total += s.cost;
    out.participatory_avg += s.participatory_score;
  }
  out.participatory_avg /= static_cast<double>(selected.size());

  std::vector<RatedScenario> rewrites;
  rewrites.reserve(originals_.size());
  try {
    for (const auto& [orig, _] : originals_) {
      Scenario rewritten = evaluator_->rewrite(orig, selected);
      ScenarioRatings r = evaluator_->rate(rewritten);
      rewrites.emplace_back(std::move(rewritten), r);
    }
  } catch (const TransportError& e) {
    throw TransportError(fmt::format("chromosome {}: {}", bits.to_string(), e.what()));
  } catch (const EvaluationError& e) {
    throw EvaluationError(fmt::format("chromosome {}: {}", bits.to_string(), e.what()));
  }
  const HarmComponents harm = harm_components(originals_, rewrites, threshold_);
  out.sev_delta_avg = harm.sev_delta_avg;
  out.mag_delta_avg = harm.mag_delta_avg;
  out.gated = harm.gated;
  return out;
}

FitnessBreakdown score(const RawComponents& raw, const WeightSet& w,
                       const NormalizationStats& stats) {
  FitnessBreakdown f;
  f.raw_sev_delta = raw.sev_delta_avg;
  f.raw_mag_delta = raw.mag_delta_avg;
  f.raw_cost = raw.cost_total;
  f.raw_participatory = raw.participatory_avg;
  f.z_sev = (raw.sev_delta_avg - stats.severity.mean) / stats.severity.sd;
  f.z_mag = (raw.mag_delta_avg - stats.magnitude.mean) / stats.magnitude.sd;
  f.z_cost = (raw.cost_total - stats.cost.mean) / stats.cost.sd;
  f.z_participatory = (raw.participatory_avg - stats.participatory.mean) / stats.participatory.sd;
  f.gated = raw.gated;
  f.total = raw.gated ? kGatedFitness
                      : w.alpha * (w.w_s * f.z_sev + w.w_m * f.z_mag) - w.beta * f.z_cost +
                            w.gamma * f.z_participatory;
  return f;
}

FitnessBreakdown fitness(const FitnessContext& ctx, const Chromosome& c, const WeightSet& weights,
                         const NormalizationStats& stats) {
  if (c.space() && *c.space() != *ctx.space()) {
    throw ConfigError("fitness: chromosome and context use different gene spaces");
  }
  if (stats.gene_space_hash != ctx.space()->hash() || stats.impact != ctx.space()->impact) {
    throw ConfigError("fitness: stats were calibrated for a different gene space");
  }
  return score(ctx.raw(c.bits()), weights, stats);
}

VariableStats describe(std::span<const double> values) {
  if (values.empty()) throw ValidationError("describe: no values");
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / static_cast<double>(values.size()))};
}

Calibration calibrate(const FitnessContext& ctx, int samples, std::uint64_t seed, int workers,
                      std::stop_token stop) {
  const std::size_t n = ctx.space()->size();
  if (samples < 2) throw ValidationError("calibration needs at least 2 samples");
  if (n < 63 && static_cast<std::uint64_t>(samples) > (std::uint64_t{1} << n) - 1) {
    throw ValidationError(fmt::format(
        "calibration: {} unique nonempty subsets requested but a {}-gene space has only {}",
        samples, n, (std::uint64_t{1} << n) - 1));
  }
  Rng rng(seed);
  Calibration cal;
  cal.chromosomes = init_population(static_cast<std::size_t>(samples), n, rng);
  cal.samples.resize(cal.chromosomes.size());
  parallel_for(
      cal.chromosomes.size(), workers,
      [&](std::size_t i) { cal.samples[i] = ctx.raw(cal.chromosomes[i]); }, stop);
  if (stop.stop_requested()) throw CancelledError();

  std::vector<double> sev, mag, cost, part;
  double active = 0.0;
  for (std::size_t i = 0; i < cal.samples.size(); ++i) {
    sev.push_back(cal.samples[i].sev_delta_avg);
    mag.push_back(cal.samples[i].mag_delta_avg);
    cost.push_back(cal.samples[i].cost_total);
    part.push_back(cal.samples[i].participatory_avg);
    active += static_cast<double>(cal.chromosomes[i].count());
  }
  NormalizationStats& st = cal.stats;
  st.severity = describe(sev);
  st.magnitude = describe(mag);
  st.cost = describe(cost);
  st.participatory = describe(part);
  st.sample_count = cal.samples.size();
  st.mean_active = active / static_cast<double>(cal.samples.size());
  st.impact = ctx.space()->impact;
  st.evaluator_id = ctx.evaluator_id();
  st.gene_space_hash = ctx.space()->hash();
  for (const auto& [name, v] : {std::pair{"severity delta", st.severity},
                                {"magnitude delta", st.magnitude},
                                {"cost", st.cost},
                                {"participatory", st.participatory}}) {
    if (!(v.sd > 0.0)) {
      throw ValidationError(fmt::format("calibration: {} has zero variance", name));
    }
  }
  return cal;
}

std::uint64_t calibration_seed(Impact impact, std::string_view evaluator_id,
                               std::string_view gene_space_hash) {
  std::uint64_t h = fnv1a(to_string(impact));
  h = fnv1a("|", h);
  h = fnv1a(evaluator_id, h);
  h = fnv1a("|", h);
  h = fnv1a(gene_space_hash, h);
  return mix64(h);
}

std::string stats_key(const NormalizationStats& s) {
  return fmt::format("{}|{}|{}", to_string(s.impact), s.evaluator_id, s.gene_space_hash);
}

namespace {

ordered_json var_json(const VariableStats& v) { return {{"mean", v.mean}, {"sd", v.sd}}; }

VariableStats var_from(const json& j) {
  return {j.at("mean").get<double>(), j.at("sd").get<double>()};
}

std::mutex& stats_file_mutex() {
  static std::mutex m;
  return m;
}

json read_stats_file(const fs::path& file) {
  if (!fs::exists(file)) return json::object();
  std::ifstream in(file);
  if (!in) throw IoError(fmt::format("cannot read stats file {}", file.string()));
  try {
    json doc = json::parse(in);
    if (!doc.is_object()) throw ValidationError("not an object");
    return doc;
  } catch (const std::exception& e) {
    throw IoError(fmt::format("stats file {} is corrupt: {}", file.string(), e.what()));
  }
}

}  // namespace

ordered_json to_json(const NormalizationStats& s) {
  return {{"impact", to_string(s.impact)},
          {"evaluator_id", s.evaluator_id},
          {"gene_space_hash", s.gene_space_hash},
          {"sample_count", s.sample_count},
          {"mean_active", s.mean_active},
          {"severity_delta", var_json(s.severity)},
          {"magnitude_delta", var_json(s.magnitude)},
          {"cost_total", var_json(s.cost)},
          {"participatory_avg", var_json(s.participatory)}};
}

NormalizationStats stats_from_json(const json& j) {
  NormalizationStats s;
  s.impact = parse_impact(j.at("impact").get<std::string>());
  s.evaluator_id = j.at("evaluator_id").get<std::string>();
  s.gene_space_hash = j.at("gene_space_hash").get<std::string>();
  s.sample_count = j.at("sample_count").get<std::size_t>();
  s.mean_active = j.at("mean_active").get<double>();
  s.severity = var_from(j.at("severity_delta"));
  s.magnitude = var_from(j.at("magnitude_delta"));
  s.cost = var_from(j.at("cost_total"));
  s.participatory = var_from(j.at("participatory_avg"));
  for (const VariableStats* v : {&s.severity, &s.magnitude, &s.cost, &s.participatory}) {
    if (!(v->sd > 0.0)) throw ValidationError("stats: sd must be > 0");
  }
  return s;
}

std::optional<NormalizationStats> load_stats(const fs::path& file, Impact impact,
                                             std::string_view evaluator_id,
                                             std::string_view gene_space_hash, int sample_count) {
  std::lock_guard lock(stats_file_mutex());
  const json doc = read_stats_file(file);
  const std::string key =
      fmt::format("{}|{}|{}", to_string(impact), evaluator_id, gene_space_hash);
  if (!doc.contains(key)) return std::nullopt;
  NormalizationStats s;
  try {
    s = stats_from_json(doc.at(key));
  } catch (const std::exception& e) {
    throw IoError(fmt::format("stats file {}: entry {}: {}", file.string(), key, e.what()));
  }
  if (static_cast<int>(s.sample_count) != sample_count) return std::nullopt;
  return s;
}

void save_stats(const fs::path& file, const NormalizationStats& stats) {
  std::lock_guard lock(stats_file_mutex());
  json doc = read_stats_file(file);
  doc[stats_key(stats)] = to_json(stats);
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  const fs::path tmp = file.string() + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw IoError(fmt::format("cannot write stats file {}", tmp.string()));
    out << doc.dump(2) << '\n';
    if (!out) throw IoError(fmt::format("cannot write stats file {}", tmp.string()));
  }
  fs::rename(tmp, file);
}

}  // namespace polopt

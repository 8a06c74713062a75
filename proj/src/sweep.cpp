#include "polopt/sweep.hpp"

#include <algorithm>
#include <cctype>
#include <fmt/format.h>
#include <fstream>
#include <set>

#include "polopt/csv.hpp"
#include "polopt/error.hpp"
#include "polopt/manifest.hpp"
#include "polopt/parallel.hpp"

namespace polopt {

namespace fs = std::filesystem;
using nlohmann::json;

SweepSpec sweep_from_json(const json& j) {
  if (!j.is_object()) throw ValidationError("sweep: expected an object");
  SweepSpec spec;
  try {
    if (j.contains("base")) spec.base = config_from_json(j.at("base"));
    spec.impact = j.contains("impact") ? parse_impact(j.at("impact").get<std::string>())
                                       : spec.base.impact;
    spec.base.impact = spec.impact;
    spec.repeats = j.value("repeats", 1);
    if (j.contains("rows")) {
      for (const json& r : j.at("rows")) {
        SweepRow row;
        row.label = r.at("label").get<std::string>();
        row.weights = normalize_weights(r.value("alpha", 0.0), r.value("beta", 0.0),
                                        r.value("gamma", 0.0), r.value("w_s", 0.65),
                                        r.value("w_m", 0.35));
        spec.rows.push_back(std::move(row));
      }
    }
  } catch (const json::exception& e) {
    throw ValidationError(fmt::format("sweep: {}", e.what()));
  }
  for (const auto& [k, v] : j.items()) {
    if (k != "impact" && k != "repeats" && k != "base" && k != "rows") {
      throw ValidationError(fmt::format("sweep: unknown key '{}'", k));
    }
  }
  if (spec.rows.empty()) throw ValidationError("sweep: no weight rows");
  if (spec.repeats < 1) throw ValidationError("sweep: repeats must be >= 1");
  std::set<std::string> labels;
  for (const SweepRow& r : spec.rows) {
    if (!labels.insert(r.label).second) {
      throw ValidationError(fmt::format("sweep: duplicate label '{}'", r.label));
    }
  }
  return spec;
}

SweepSpec load_sweep_spec(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot read sweep spec {}", path.string()));
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError(fmt::format("sweep spec {}: {}", path.string(), e.what()));
  }
  return sweep_from_json(doc);
}

RunConfig sweep_config(const SweepSpec& spec, std::size_t row, int repeat) {
  RunConfig c = spec.base;
  c.impact = spec.impact;
  c.label = spec.rows.at(row).label;
  c.weights = spec.rows.at(row).weights;
  c.seed = spec.base.seed + static_cast<std::uint64_t>(repeat);
  return c;
}

std::string slug(std::string_view text) {
  std::string out;
  bool dash = false;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c)) {
      if (dash && !out.empty()) out.push_back('-');
      out.push_back(static_cast<char>(std::tolower(c)));
      dash = false;
    } else {
      dash = true;
    }
  }
  return out.empty() ? "run" : out;
}

std::vector<SweepRun> run_sweep(const SweepSpec& spec, const DatasetBundle& bundle,
                                const EngineOptions& options, const fs::path& out_dir, int jobs) {
  std::vector<SweepRun> runs;
  for (std::size_t r = 0; r < spec.rows.size(); ++r) {
    for (int k = 0; k < spec.repeats; ++k) {
      SweepRun run;
      run.row = r;
      run.repeat = k;
      run.dir = out_dir / fmt::format("{}-r{}", slug(spec.rows[r].label), k);
      runs.push_back(std::move(run));
    }
  }
  parallel_for(runs.size(), jobs, [&](std::size_t i) {
    SweepRun& run = runs[i];
    try {
      RunResult result = execute_run(sweep_config(spec, run.row, run.repeat), bundle, options);
      write_run_artifacts(run.dir, result);
      run.result = std::move(result);
    } catch (const std::exception& e) {
      run.error = e.what();
    }
  });
  return runs;
}

void write_sweep_summary(std::ostream& out, const SweepSpec& spec,
                         const std::vector<SweepRun>& runs, const SapTable& table) {
  csv::write_row(out, {"label", "alpha", "beta", "gamma", "runs", "failed", "sev_delta_mean",
                       "mag_delta_mean", "count_mean", "count_min", "count_max", "pct_mean",
                       "pct_min", "pct_max", "cost_mean", "participatory_mean",
                       "nonviable_mean"});
  const double total = static_cast<double>(table.size());
  for (std::size_t r = 0; r < spec.rows.size(); ++r) {
    const SweepRow& row = spec.rows[r];
    int ok = 0, failed = 0;
    double sev = 0, mag = 0, count = 0, cost = 0, part = 0, nonviable = 0;
    std::size_t lo = 0, hi = 0;
    for (const SweepRun& run : runs) {
      if (run.row != r) continue;
      if (!run.result) {
        ++failed;
        continue;
      }
      const RunResult& res = *run.result;
      const std::size_t n = res.selected_sap_ids.size();
      lo = ok == 0 ? n : std::min(lo, n);
      hi = ok == 0 ? n : std::max(hi, n);
      ++ok;
      sev += res.best_breakdown.raw_sev_delta;
      mag += res.best_breakdown.raw_mag_delta;
      cost += res.best_breakdown.raw_cost;
      part += res.best_breakdown.raw_participatory;
      count += static_cast<double>(n);
      for (int id : res.selected_sap_ids) {
        if (const Sap* s = table.find(id); s && s->nonviable) nonviable += 1;
      }
    }
    auto num = [](double v) { return csv::format_number(v); };
    csv::Row line{row.label, num(row.weights.alpha), num(row.weights.beta),
                  num(row.weights.gamma), std::to_string(ok), std::to_string(failed)};
    if (ok == 0) {
      for (int i = 0; i < 11; ++i) line.emplace_back();
    } else {
      const double d = ok;
      line.insert(line.end(),
                  {num(sev / d), num(mag / d), num(count / d), std::to_string(lo),
                   std::to_string(hi), num(100.0 * count / d / total),
                   num(100.0 * static_cast<double>(lo) / total),
                   num(100.0 * static_cast<double>(hi) / total), num(cost / d), num(part / d),
                   num(nonviable / d)});
    }
    csv::write_row(out, line);
  }
}

}  // namespace polopt

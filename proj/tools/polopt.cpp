#include <csignal>
#include <cstdlib>
#include <ctime>
#include <fmt/format.h>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "json.hpp"

#include "polopt/datasets.hpp"
#include "polopt/engine.hpp"
#include "polopt/error.hpp"
#include "polopt/manifest.hpp"
#include "polopt/service.hpp"
#include "polopt/sweep.hpp"

namespace fs = std::filesystem;
using namespace polopt;

namespace {

// Flags shared by run, combined and calibrate.
struct RunFlags {
  std::string config_file;
  std::optional<std::string> impact;  // unset: config file or default
  std::string label;
  std::optional<double> alpha, beta, gamma, ws, wm;
  std::optional<std::uint64_t> seed;
  std::string population = "auto";
  std::optional<int> max_generations, stall, elitism, workers, samples, population_cap;
  std::optional<double> crossover, mutation, threshold;
  std::vector<int> gene_ids;
  std::string evaluator = "surrogate";
  std::optional<std::uint64_t> surrogate_seed;
  std::string endpoint, model, api_key_env, reasoning_effort;
  std::string cache;
  std::string stats;
  std::string out;
};

void add_run_flags(CLI::App* cmd, RunFlags& f, bool with_impact) {
  cmd->add_option("--config", f.config_file, "RunConfig JSON; flags override its fields")
      ->check(CLI::ExistingFile);
  if (with_impact) cmd->add_option("--impact", f.impact, "political_manipulation|unemployment|sensationalism");
  cmd->add_option("--label", f.label, "Free-text run label");
  cmd->add_option("--alpha", f.alpha, "Harm weight");
  cmd->add_option("--beta", f.beta, "Cost weight");
  cmd->add_option("--gamma", f.gamma, "Participatory weight");
  cmd->add_option("--ws", f.ws, "Severity share of harm");
  cmd->add_option("--wm", f.wm, "Magnitude share of harm");
  cmd->add_option("--seed", f.seed, "GA seed");
  cmd->add_option("--population", f.population, "Population size or 'auto'");
  cmd->add_option("--population-cap", f.population_cap, "Ceiling for the auto population");
  cmd->add_option("--max-generations", f.max_generations);
  cmd->add_option("--stall", f.stall, "Consecutive stall generations before stopping");
  cmd->add_option("--elitism", f.elitism, "Elites copied per generation");
  cmd->add_option("--crossover", f.crossover, "Crossover chance");
  cmd->add_option("--mutation", f.mutation, "Per-bit mutation chance");
  cmd->add_option("--threshold", f.threshold, "Plausibility gate");
  cmd->add_option("--samples", f.samples, "Calibration sample size");
  cmd->add_option("--workers", f.workers, "Concurrent chromosome evaluations");
  cmd->add_option("--genes", f.gene_ids, "Restrict the gene space to these SAP ids")->delimiter(',');
  cmd->add_option("--evaluator", f.evaluator, "surrogate|remote")
      ->check(CLI::IsMember({"surrogate", "remote"}));
  cmd->add_option("--surrogate-seed", f.surrogate_seed);
  cmd->add_option("--endpoint", f.endpoint, "Remote base URL");
  cmd->add_option("--model", f.model, "Remote model name");
  cmd->add_option("--api-key-env", f.api_key_env, "Environment variable holding the API key");
  cmd->add_option("--reasoning-effort", f.reasoning_effort);
  cmd->add_option("--cache", f.cache, "Evaluator cache file (JSON lines)");
  cmd->add_option("--stats", f.stats, "Calibration stats file");
}

RunConfig build_config(const RunFlags& f, std::optional<Impact> forced_impact) {
  nlohmann::json j = nlohmann::json::object();
  if (!f.config_file.empty()) {
    std::ifstream in(f.config_file);
    if (!in) throw IoError(fmt::format("cannot read {}", f.config_file));
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(fmt::format("{}: {}", f.config_file, e.what()));
    }
  }
  RunConfig c = config_from_json(j);
  if (forced_impact) {
    c.impact = *forced_impact;
  } else if (f.impact) {
    try {
      c.impact = parse_impact(*f.impact);
    } catch (const ValidationError& e) {
      throw ConfigError(e.what());
    }
  }
  if (!f.label.empty()) c.label = f.label;

  WeightSet w = c.weights;
  if (f.alpha) w.alpha = *f.alpha;
  if (f.beta) w.beta = *f.beta;
  if (f.gamma) w.gamma = *f.gamma;
  if (f.ws) w.w_s = *f.ws;
  if (f.wm) w.w_m = *f.wm;
  try {
    c.weights = normalize_weights(w);
  } catch (const ValidationError& e) {
    throw ConfigError(e.what());
  }

  if (f.seed) c.seed = *f.seed;
  if (f.population == "auto") {
    if (!f.config_file.empty() && j.contains("population_size")) {
      // keep the file's value
    } else {
      c.population_size.reset();
    }
  } else {
    try {
      c.population_size = std::stoi(f.population);
    } catch (const std::exception&) {
      throw ConfigError(fmt::format("--population must be an integer or 'auto', got '{}'",
                                    f.population));
    }
  }
  if (f.population_cap) c.population_cap = *f.population_cap;
  if (f.max_generations) c.max_generations = *f.max_generations;
  if (f.stall) c.stall_generations = *f.stall;
  if (f.elitism) c.elitism_k = *f.elitism;
  if (f.crossover) c.crossover_chance = *f.crossover;
  if (f.mutation) c.mutation_chance = *f.mutation;
  if (f.threshold) c.plausibility_threshold = *f.threshold;
  if (f.samples) c.calibration_samples = *f.samples;
  if (f.workers) c.workers = *f.workers;
  if (!f.gene_ids.empty()) c.gene_ids = f.gene_ids;

  if (f.config_file.empty() || f.evaluator != "surrogate") c.evaluator.kind = f.evaluator;
  if (f.surrogate_seed) c.evaluator.surrogate.seed = *f.surrogate_seed;
  if (!f.endpoint.empty()) c.evaluator.remote.endpoint = f.endpoint;
  if (!f.model.empty()) c.evaluator.remote.model = f.model;
  if (!f.api_key_env.empty()) c.evaluator.remote.api_key_env = f.api_key_env;
  if (!f.reasoning_effort.empty()) c.evaluator.remote.reasoning_effort = f.reasoning_effort;
  if (!f.cache.empty()) c.evaluator.cache_path = f.cache;
  validate_config(c);
  return c;
}

EngineOptions engine_options(const fs::path& data_dir, const std::string& stats) {
  EngineOptions o;
  o.population_defaults = load_population_defaults(data_dir / "config" / "population.json");
  o.stats_path = stats;
  return o;
}

std::string timestamp() {
  std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%SZ", &tm);
  return buf;
}

std::string default_label(const RunConfig& c) {
  if (!c.label.empty()) return c.label;
  return fmt::format("{}-a{:g}-b{:g}-g{:g}", to_string(c.impact), c.weights.alpha,
                     c.weights.beta, c.weights.gamma);
}

int cmd_validate(const fs::path& data_dir) {
  const DatasetBundle bundle = load_bundle(data_dir);
  const ValidationReport report = validate_bundle(bundle);
  fmt::print("dataset version {}\n", bundle.version);
  for (const auto& [impact, t] : report.tables) {
    fmt::print("{:<24} saps {:>3}  nonviable {:>3}  feasible {:>3}  scenarios {}\n",
               to_string(impact), t.saps, t.nonviable, t.feasible, t.scenarios);
  }
  for (const std::string& v : report.violations) fmt::print(stderr, "violation: {}\n", v);
  return report.ok() ? 0 : static_cast<int>(ExitCode::validation);
}

int cmd_calibrate(const fs::path& data_dir, const RunFlags& f) {
  const RunConfig c = build_config(f, std::nullopt);
  const DatasetBundle bundle = load_bundle(data_dir);
  RunSetup s = prepare_run(c, bundle);
  FitnessContext ctx(s.table, s.space, s.scenarios, s.evaluator, c.plausibility_threshold,
                     c.weights.beta);
  fs::path stats_path = f.stats;
  if (stats_path.empty() && !c.evaluator.cache_path.empty()) {
    stats_path = c.evaluator.cache_path + ".stats.json";
  }
  const NormalizationStats stats = obtain_stats(c, ctx, stats_path);
  std::cout << to_json(stats).dump(2) << '\n';
  return 0;
}

int cmd_run(const fs::path& data_dir, const RunFlags& f, std::optional<Impact> impact) {
  const RunConfig c = build_config(f, impact);
  const DatasetBundle bundle = load_bundle(data_dir);
  const SapTable table = table_for(bundle, c.impact);
  EngineHooks hooks;
  hooks.on_generation = [](const GenerationRecord& g) {
    fmt::print(stderr, "gen {:>4}  best {:.6f}  mean {:.6f}\n", g.index, g.best_fitness,
               g.mean_fitness);
  };
  const RunResult r = execute_run(c, bundle, engine_options(data_dir, f.stats), hooks);
  const fs::path out =
      f.out.empty() ? fs::path("runs") / fmt::format("{}-{}", timestamp(), slug(default_label(c)))
                    : fs::path(f.out);
  write_run_artifacts(out, r);

  fmt::print("impact {}  population {}  generations {}  stopped {}\n", to_string(c.impact),
             r.population, r.generations.size(), to_string(r.stopped_reason));
  fmt::print("fitness {:.6f}  sev_delta {:.4f}  mag_delta {:.4f}  cost {:g}  participatory {:.4f}\n",
             r.best_breakdown.total, r.best_breakdown.raw_sev_delta,
             r.best_breakdown.raw_mag_delta, r.best_breakdown.raw_cost,
             r.best_breakdown.raw_participatory);
  fmt::print("selected {} SAPs:\n", r.selected_sap_ids.size());
  for (int id : r.selected_sap_ids) {
    const Sap& s = table.at(id);
    fmt::print("  {:>3}  {} | {}\n", id, s.stakeholder, s.action);
  }
  fmt::print("manifest {}\n", (out / "manifest.json").string());
  return 0;
}

int cmd_sweep(const fs::path& data_dir, const std::string& spec_file, const std::string& out_arg,
              int jobs, const std::string& stats) {
  const SweepSpec spec = load_sweep_spec(spec_file);
  const DatasetBundle bundle = load_bundle(data_dir);
  const SapTable table = table_for(bundle, spec.impact);
  const fs::path out = out_arg.empty()
                           ? fs::path("runs") / fmt::format("{}-sweep-{}", timestamp(),
                                                            to_string(spec.impact))
                           : fs::path(out_arg);
  fs::create_directories(out);
  const std::vector<SweepRun> runs =
      run_sweep(spec, bundle, engine_options(data_dir, stats), out, jobs);
  {
    std::ofstream csv(out / "summary.csv");
    if (!csv) throw IoError(fmt::format("cannot write {}", (out / "summary.csv").string()));
    write_sweep_summary(csv, spec, runs, table);
  }
  std::vector<RunResult> done;
  for (const SweepRun& r : runs) {
    if (r.result) {
      done.push_back(*r.result);
    } else {
      fmt::print(stderr, "run {} failed: {}\n", r.dir.string(), r.error);
    }
  }
  if (!done.empty()) {
    std::ofstream hm(out / "heatmap.csv");
    write_heatmap(hm, done, table);
  }
  fmt::print("{} of {} runs done; summary {}\n", done.size(), runs.size(),
             (out / "summary.csv").string());
  return done.empty() ? static_cast<int>(ExitCode::evaluator) : 0;
}

int cmd_heatmap(const fs::path& data_dir, const std::vector<std::string>& manifests,
                const std::string& out) {
  std::vector<RunResult> runs;
  for (const std::string& m : manifests) {
    fs::path p = m;
    if (fs::is_directory(p)) p /= "manifest.json";
    runs.push_back(load_manifest(p));
  }
  if (runs.empty()) throw ValidationError("no manifests given");
  const DatasetBundle bundle = load_bundle(data_dir);
  const SapTable table = table_for(bundle, runs.front().config.impact);
  if (out.empty() || out == "-") {
    write_heatmap(std::cout, runs, table);
  } else {
    std::ofstream f(out);
    if (!f) throw IoError(fmt::format("cannot write {}", out));
    write_heatmap(f, runs, table);
  }
  return 0;
}

Service* g_service = nullptr;

extern "C" void on_signal(int) {
  if (g_service) g_service->stop();
}

const char* env_or(const char* name, const char* fallback) {
  const char* v = std::getenv(name);
  return v && *v ? v : fallback;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Participatory policy search over stakeholder-action pairs"};
  app.require_subcommand(1);
  std::string data_dir = POLOPT_DATA_DIR;
  app.add_option("--data", data_dir, "Dataset directory")->capture_default_str();

  auto* validate = app.add_subcommand("validate", "Check the dataset bundle");

  RunFlags cal_flags;
  auto* calibrate = app.add_subcommand("calibrate", "Compute normalization stats");
  add_run_flags(calibrate, cal_flags, true);

  RunFlags run_flags;
  auto* run = app.add_subcommand("run", "Run the GA for one impact");
  add_run_flags(run, run_flags, true);
  run->add_option("--out", run_flags.out, "Output directory (default runs/<timestamp>-<label>)");

  RunFlags comb_flags;
  auto* combined = app.add_subcommand("combined", "Run the GA over the merged 62-SAP space");
  add_run_flags(combined, comb_flags, false);
  combined->add_option("--out", comb_flags.out, "Output directory");

  std::string spec_file, sweep_out, sweep_stats;
  int jobs = 1;
  auto* sweep = app.add_subcommand("sweep", "Run every weight row of a sweep spec");
  sweep->add_option("spec", spec_file, "Sweep spec JSON")->required()->check(CLI::ExistingFile);
  sweep->add_option("--out", sweep_out, "Output directory");
  sweep->add_option("--jobs", jobs, "Runs executed concurrently")->check(CLI::PositiveNumber);
  sweep->add_option("--stats", sweep_stats, "Calibration stats file");

  std::vector<std::string> manifests;
  std::string heatmap_out;
  auto* heatmap = app.add_subcommand("heatmap", "Selection matrix CSV from run manifests");
  heatmap->add_option("manifests", manifests, "manifest.json files or run directories")
      ->required();
  heatmap->add_option("--out", heatmap_out, "CSV path (default stdout)");

  ServiceOptions so;
  so.host = env_or("POLOPT_HOST", "127.0.0.1");
  so.port = std::atoi(env_or("POLOPT_PORT", "8080"));
  so.run_dir = env_or("POLOPT_RUN_DIR", "runs");
  std::string static_dir, serve_stats;
  auto* serve = app.add_subcommand("serve", "Start the HTTP service");
  serve->add_option("--host", so.host)->capture_default_str();
  serve->add_option("--port", so.port)->capture_default_str();
  serve->add_option("--run-dir", so.run_dir)->capture_default_str();
  serve->add_option("--static", static_dir, "Directory of UI files served at /");
  serve->add_option("--max-concurrent", so.max_concurrent)->capture_default_str();
  serve->add_option("--queue-cap", so.queue_cap)->capture_default_str();
  serve->add_option("--stats", serve_stats, "Calibration stats file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(ExitCode::config);
  }

  try {
    if (*validate) return cmd_validate(data_dir);
    if (*calibrate) return cmd_calibrate(data_dir, cal_flags);
    if (*run) return cmd_run(data_dir, run_flags, std::nullopt);
    if (*combined) return cmd_run(data_dir, comb_flags, Impact::combined);
    if (*sweep) return cmd_sweep(data_dir, spec_file, sweep_out, jobs, sweep_stats);
    if (*heatmap) return cmd_heatmap(data_dir, manifests, heatmap_out);
    if (*serve) {
      so.data_dir = data_dir;
      so.static_dir = static_dir;
      so.engine = engine_options(data_dir, serve_stats);
      Service service(so);
      const int port = service.bind();
      g_service = &service;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      fmt::print("listening on http://{}:{}\n", so.host, port);
      std::fflush(stdout);
      service.listen();
      g_service = nullptr;
      return 0;
    }
  } catch (const Error& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return static_cast<int>(e.code());
  } catch (const fs::filesystem_error& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return static_cast<int>(ExitCode::io);
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return static_cast<int>(ExitCode::evaluator);
  }
  return 0;
}

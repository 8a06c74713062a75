#include "polopt/service.hpp"

#include <atomic>
#include <ctime>
#include <fmt/format.h>
#include <fstream>
#include <sstream>

#include "httplib.h"

#include "polopt/error.hpp"
#include "polopt/manifest.hpp"
#include "polopt/sweep.hpp"

namespace polopt {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

ordered_json handle_json(const RunSnapshot& s) {
  ordered_json j;
  j["run_id"] = s.id;
  j["state"] = to_string(s.state);
  j["label"] = s.config.label;
  j["impact"] = to_string(s.config.impact);
  j["generations"] = s.generations.size();
  j["progress"] = s.generations.empty() ? ordered_json(nullptr) : to_json(s.generations.back());
  j["error"] = s.error.empty() ? ordered_json(nullptr) : ordered_json(s.error);
  j["config"] = to_json(s.config);
  return j;
}

RunRegistry::RunRegistry(std::shared_ptr<const DatasetBundle> bundle, EngineOptions engine,
                         fs::path run_dir, int max_concurrent, int queue_cap)
    : bundle_(std::move(bundle)),
      engine_(std::move(engine)),
      run_dir_(std::move(run_dir)),
      queue_cap_(queue_cap) {
  if (max_concurrent < 1) throw ConfigError("max_concurrent must be >= 1");
  if (queue_cap < 0) throw ConfigError("queue_cap must be >= 0");
  load_existing();
  for (int i = 0; i < max_concurrent; ++i) {
    workers_.emplace_back([this](std::stop_token st) { worker(st); });
  }
}

RunRegistry::~RunRegistry() {
  {
    std::lock_guard lock(mutex_);
    for (auto& [id, run] : runs_) run->stop.request_stop();
  }
  for (auto& w : workers_) w.request_stop();
  changed_.notify_all();
  workers_.clear();
}

void RunRegistry::load_existing() {
  if (run_dir_.empty() || !fs::is_directory(run_dir_)) return;
  std::vector<fs::path> dirs;
  for (const auto& entry : fs::directory_iterator(run_dir_)) {
    if (entry.is_directory() && fs::exists(entry.path() / "manifest.json")) {
      dirs.push_back(entry.path());
    }
  }
  std::sort(dirs.begin(), dirs.end());
  for (const fs::path& dir : dirs) {
    try {
      RunResult r = load_manifest(dir / "manifest.json");
      auto run = std::make_shared<Run>();
      run->id = dir.filename().string();
      run->config = r.config;
      run->state = RunState::done;
      run->generations = r.generations;
      run->manifest = manifest_text(r);
      runs_[run->id] = run;
      order_.push_back(run->id);
    } catch (const Error&) {
      // Unreadable artifacts are skipped; the directory stays untouched.
    }
  }
}

std::string RunRegistry::submit(RunConfig config) {
  validate_config(config);
  {
    // Fail fast on configs the bundle cannot satisfy.
    const SapTable table = table_for(*bundle_, config.impact);
    if (config.gene_ids) {
      (void)build_gene_space(table, *config.gene_ids, config.weights.beta);
    }
    (void)scenarios_for(*bundle_, config.impact);
  }
  auto run = std::make_shared<Run>();
  run->config = std::move(config);

  std::lock_guard lock(mutex_);
  if (static_cast<int>(queue_.size()) >= queue_cap_) throw QueueFullError();
  std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y%m%dT%H%M%SZ", &tm);
  do {
    run->id = fmt::format("{}-{}-{:04}", stamp, slug(run->config.label), ++counter_);
  } while (runs_.contains(run->id));
  runs_[run->id] = run;
  order_.push_back(run->id);
  queue_.push_back(run);
  changed_.notify_all();
  return run->id;
}

void RunRegistry::worker(std::stop_token st) {
  for (;;) {
    std::shared_ptr<Run> run;
    {
      std::unique_lock lock(mutex_);
      changed_.wait(lock, st, [&] { return !queue_.empty(); });
      if (st.stop_requested()) return;
      run = queue_.front();
      queue_.pop_front();
      if (is_terminal(run->state)) continue;  // cancelled while queued
    }
    execute(run);
  }
}

void RunRegistry::execute(const std::shared_ptr<Run>& run) {
  EngineHooks hooks;
  hooks.stop = run->stop.get_token();
  hooks.on_state = [&](RunState s) {
    std::lock_guard lock(mutex_);
    if (!is_terminal(run->state) && s != RunState::done) run->state = s;
    changed_.notify_all();
  };
  hooks.on_generation = [&](const GenerationRecord& g) {
    std::lock_guard lock(mutex_);
    run->generations.push_back(g);
    changed_.notify_all();
  };
  try {
    RunResult result = execute_run(run->config, *bundle_, engine_, hooks);
    std::string text = manifest_text(result);
    if (!run_dir_.empty()) write_run_artifacts(run_dir_ / run->id, result);
    std::lock_guard lock(mutex_);
    if (!is_terminal(run->state)) {
      run->manifest = std::move(text);
      run->state = RunState::done;
    }
  } catch (const CancelledError&) {
    std::lock_guard lock(mutex_);
    run->state = RunState::cancelled;
  } catch (const std::exception& e) {
    std::lock_guard lock(mutex_);
    if (!is_terminal(run->state)) {
      run->state = RunState::failed;
      run->error = e.what();
    }
  }
  changed_.notify_all();
}

RunSnapshot RunRegistry::snapshot(const Run& r) const {
  return {r.id, r.state, r.config, r.generations, r.error, r.manifest};
}

std::optional<RunSnapshot> RunRegistry::get(const std::string& id) const {
  std::lock_guard lock(mutex_);
  auto it = runs_.find(id);
  if (it == runs_.end()) return std::nullopt;
  return snapshot(*it->second);
}

std::vector<RunSnapshot> RunRegistry::list() const {
  std::lock_guard lock(mutex_);
  std::vector<RunSnapshot> out;
  for (const std::string& id : order_) out.push_back(snapshot(*runs_.at(id)));
  return out;
}

RunRegistry::CancelOutcome RunRegistry::cancel(const std::string& id) {
  std::lock_guard lock(mutex_);
  auto it = runs_.find(id);
  if (it == runs_.end()) return CancelOutcome::unknown;
  Run& run = *it->second;
  if (is_terminal(run.state)) return CancelOutcome::terminal;
  run.stop.request_stop();
  run.state = RunState::cancelled;
  std::erase(queue_, it->second);  // a queued run frees its slot at once
  changed_.notify_all();
  return CancelOutcome::cancelled;
}

std::optional<RunSnapshot> RunRegistry::wait(const std::string& id, std::size_t seen,
                                             std::chrono::milliseconds timeout) const {
  std::unique_lock lock(mutex_);
  auto it = runs_.find(id);
  if (it == runs_.end()) return std::nullopt;
  const Run& run = *it->second;
  changed_.wait_for(lock, timeout,
                    [&] { return run.generations.size() > seen || is_terminal(run.state); });
  return snapshot(run);
}

namespace {

void send_json(httplib::Response& res, int status, const ordered_json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view message) {
  send_json(res, status, ordered_json{{"error", message}});
}

}  // namespace

struct Service::Impl {
  ServiceOptions options;
  httplib::Server server;
  std::atomic<bool> closing{false};
  std::shared_ptr<const DatasetBundle> bundle;
};

Service::Service(ServiceOptions options) : impl_(std::make_unique<Impl>()) {
  impl_->options = std::move(options);
  const ServiceOptions& o = impl_->options;
  impl_->bundle = std::make_shared<const DatasetBundle>(load_bundle(o.data_dir));
  registry_ = std::make_unique<RunRegistry>(impl_->bundle, o.engine, o.run_dir, o.max_concurrent,
                                            o.queue_cap);

  httplib::Server& svr = impl_->server;
  RunRegistry& reg = *registry_;
  Impl& impl = *impl_;
  svr.set_default_headers({{"Access-Control-Allow-Origin", "*"}});

  svr.Get("/health", [](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200, {{"status", "ok"}});
  });

  svr.Get("/datasets", [&impl](const httplib::Request&, httplib::Response& res) {
    const ValidationReport report = validate_bundle(*impl.bundle);
    ordered_json items = ordered_json::array();
    for (const auto& [impact, t] : report.tables) {
      items.push_back({{"impact", to_string(impact)},
                       {"display_name", display_name(impact)},
                       {"saps", t.saps},
                       {"nonviable", t.nonviable},
                       {"feasible", t.feasible},
                       {"scenarios", t.scenarios}});
    }
    send_json(res, 200, {{"version", impl.bundle->version}, {"datasets", items}});
  });

  svr.Get(R"(/datasets/([a-z_A-Z]+)/saps)",
          [&impl](const httplib::Request& req, httplib::Response& res) {
            Impact impact;
            try {
              impact = parse_impact(req.matches[1].str());
            } catch (const ValidationError& e) {
              return send_error(res, 404, e.what());
            }
            try {
              const SapTable table = table_for(*impl.bundle, impact);
              ordered_json items = ordered_json::array();
              for (const Sap& s : table.saps) items.push_back(to_json(s));
              send_json(res, 200, items);
            } catch (const Error& e) {
              send_error(res, 404, e.what());
            }
          });

  svr.Post("/runs", [&reg](const httplib::Request& req, httplib::Response& res) {
    json body;
    try {
      body = json::parse(req.body);
    } catch (const json::exception& e) {
      return send_error(res, 400, fmt::format("invalid JSON: {}", e.what()));
    }
    try {
      const std::string id = reg.submit(config_from_json(body));
      send_json(res, 202, handle_json(*reg.get(id)));
    } catch (const QueueFullError& e) {
      send_error(res, 429, e.what());
    } catch (const Error& e) {
      send_error(res, 400, e.what());
    } catch (const json::exception& e) {
      send_error(res, 400, e.what());
    }
  });

  svr.Get("/runs", [&reg](const httplib::Request&, httplib::Response& res) {
    ordered_json items = ordered_json::array();
    for (const RunSnapshot& s : reg.list()) {
      ordered_json h = handle_json(s);
      h.erase("config");
      items.push_back(std::move(h));
    }
    send_json(res, 200, items);
  });

  svr.Get(R"(/runs/([^/]+))", [&reg](const httplib::Request& req, httplib::Response& res) {
    auto s = reg.get(req.matches[1].str());
    if (!s) return send_error(res, 404, "unknown run");
    send_json(res, 200, handle_json(*s));
  });

  svr.Get(R"(/runs/([^/]+)/result)", [&reg](const httplib::Request& req, httplib::Response& res) {
    auto s = reg.get(req.matches[1].str());
    if (!s) return send_error(res, 404, "unknown run");
    if (s->state != RunState::done || !s->manifest) {
      return send_error(res, 409, fmt::format("run is {}", to_string(s->state)));
    }
    res.status = 200;
    res.set_content(*s->manifest, "application/json");
  });

  svr.Get(R"(/runs/([^/]+)/events)",
          [&reg, &impl](const httplib::Request& req, httplib::Response& res) {
            const std::string id = req.matches[1].str();
            if (!reg.get(id)) return send_error(res, 404, "unknown run");
            auto sent = std::make_shared<std::size_t>(0);
            res.set_header("Cache-Control", "no-cache");
            res.set_chunked_content_provider(
                "text/event-stream",
                [&reg, &impl, id, sent](std::size_t, httplib::DataSink& sink) {
                  while (!impl.closing.load()) {
                    auto s = reg.wait(id, *sent, std::chrono::milliseconds(250));
                    if (!s) return false;
                    while (*sent < s->generations.size()) {
                      const std::string msg = fmt::format(
                          "event: generation\ndata: {}\n\n",
                          to_json(s->generations[*sent]).dump());
                      if (!sink.write(msg.data(), msg.size())) return false;
                      ++*sent;
                    }
                    if (is_terminal(s->state)) {
                      const std::string msg = fmt::format(
                          "event: end\ndata: {}\n\n",
                          ordered_json{{"state", to_string(s->state)}}.dump());
                      sink.write(msg.data(), msg.size());
                      sink.done();
                      return true;
                    }
                    if (!sink.is_writable()) return false;
                  }
                  return false;
                });
          });

  svr.Delete(R"(/runs/([^/]+))", [&reg](const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1].str();
    switch (reg.cancel(id)) {
      case RunRegistry::CancelOutcome::unknown: return send_error(res, 404, "unknown run");
      case RunRegistry::CancelOutcome::terminal:
        return send_error(res, 409, "run already finished");
      case RunRegistry::CancelOutcome::cancelled: break;
    }
    send_json(res, 200, handle_json(*reg.get(id)));
  });

  if (!o.static_dir.empty() && !svr.set_mount_point("/", o.static_dir.string())) {
    throw IoError(fmt::format("cannot serve static files from {}", o.static_dir.string()));
  }
}

Service::~Service() {
  stop();
  registry_.reset();
}

int Service::bind() {
  const ServiceOptions& o = impl_->options;
  int port = o.port;
  if (port == 0) {
    port = impl_->server.bind_to_any_port(o.host);
  } else if (!impl_->server.bind_to_port(o.host, port)) {
    port = -1;
  }
  if (port < 0) throw IoError(fmt::format("cannot listen on {}:{}", o.host, o.port));
  return port;
}

void Service::listen() { impl_->server.listen_after_bind(); }

void Service::stop() {
  impl_->closing = true;
  impl_->server.stop();
}

}  // namespace polopt

#pragma once

#include <chrono>
#include <condition_variable>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stop_token>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "polopt/datasets.hpp"
#include "polopt/error.hpp"
#include "polopt/engine.hpp"

namespace polopt {

class QueueFullError : public Error {
 public:
  QueueFullError() : Error(ExitCode::config, "run queue is full") {}
};

struct RunSnapshot {
  std::string id;
  RunState state = RunState::queued;
  RunConfig config;
  std::vector<GenerationRecord> generations;
  std::string error;
  std::optional<std::string> manifest;  // canonical manifest text once done
};

nlohmann::ordered_json handle_json(const RunSnapshot& s);

// Owns submitted runs: a FIFO queue drained by max_concurrent workers. Done
// runs are written to run_dir/<id>/ and reloaded from there at startup.
class RunRegistry {
 public:
  RunRegistry(std::shared_ptr<const DatasetBundle> bundle, EngineOptions engine,
              std::filesystem::path run_dir, int max_concurrent = 2, int queue_cap = 16);
  ~RunRegistry();

  RunRegistry(const RunRegistry&) = delete;
  RunRegistry& operator=(const RunRegistry&) = delete;

  // Throws ConfigError/ValidationError for configs that cannot run against
  // the bundle and QueueFullError when queue_cap runs are already waiting.
  std::string submit(RunConfig config);

  std::optional<RunSnapshot> get(const std::string& id) const;
  std::vector<RunSnapshot> list() const;

  enum class CancelOutcome { cancelled, unknown, terminal };
  CancelOutcome cancel(const std::string& id);

  // Blocks until the run has more than `seen` generations, reaches a terminal
  // state, or the timeout passes. Returns nullopt for unknown ids.
  std::optional<RunSnapshot> wait(const std::string& id, std::size_t seen,
                                  std::chrono::milliseconds timeout) const;

  const DatasetBundle& bundle() const noexcept { return *bundle_; }

 private:
  struct Run {
    std::string id;
    RunConfig config;
    RunState state = RunState::queued;
    std::vector<GenerationRecord> generations;
    std::string error;
    std::optional<std::string> manifest;
    std::stop_source stop;
  };

  void worker(std::stop_token st);
  void execute(const std::shared_ptr<Run>& run);
  void load_existing();
  RunSnapshot snapshot(const Run& r) const;

  std::shared_ptr<const DatasetBundle> bundle_;
  EngineOptions engine_;
  std::filesystem::path run_dir_;
  int queue_cap_;

  mutable std::mutex mutex_;
  mutable std::condition_variable_any changed_;
  std::map<std::string, std::shared_ptr<Run>> runs_;
  std::vector<std::string> order_;
  std::deque<std::shared_ptr<Run>> queue_;
  std::uint64_t counter_ = 0;
  std::vector<std::jthread> workers_;
};

struct ServiceOptions {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  std::filesystem::path data_dir;
  std::filesystem::path run_dir = "runs";
  std::filesystem::path static_dir;  // optional UI build to serve at /
  int max_concurrent = 2;
  int queue_cap = 16;
  EngineOptions engine;
};

// HTTP front end over a RunRegistry.
class Service {
 public:
  explicit Service(ServiceOptions options);
  ~Service();

  // Binds the listening socket; returns the bound port.
  int bind();
  // Serves until stop() is called.
  void listen();
  void stop();

  RunRegistry& registry() noexcept { return *registry_; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::unique_ptr<RunRegistry> registry_;
};

}  // namespace polopt

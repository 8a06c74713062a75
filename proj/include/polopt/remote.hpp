#pragma once

#include <chrono>
#include <functional>
#include <memory>
#include <mutex>
#include <semaphore>
#include <string>
#include <vector>

#include "polopt/evaluator.hpp"
#include "polopt/panel.hpp"
#include "polopt/rng.hpp"

namespace polopt {

struct HttpReply {
  int status = 0;           // 0 when the request never completed
  std::string body;
  std::string error;        // transport-level failure description
};

// Sends one JSON request body to the chat-completions endpoint.
using HttpTransport = std::function<HttpReply(const std::string& request_body)>;
using Sleeper = std::function<void(std::chrono::duration<double>)>;

struct RatingOutcome {
  ScenarioRatings ratings;
  JudgePanelOutput panel;
  std::vector<std::string> raw_replies;
  int reprompts = 0;          // 1 when the first reply failed to parse
  int transport_retries = 0;  // retried requests across the call
};

// Chat-completion judge panel. Transient failures (no response, 408, 429,
// 5xx) are retried max_retries times with delays backoff_base_s * 2^k and
// +-10% jitter; an unparseable panel reply is re-prompted once.
class RemoteEvaluator final : public Evaluator {
 public:
  // transport/sleeper default to an HTTP client and std::this_thread::sleep_for.
  explicit RemoteEvaluator(RemoteSettings settings, HttpTransport transport = {},
                           Sleeper sleeper = {});
  ~RemoteEvaluator() override;

  Scenario rewrite(const Scenario& scenario, std::span<const Sap> selected) override;
  ScenarioRatings rate(const Scenario& scenario) override;
  std::string id() const override { return id_; }
  TokenUsage usage() const override;

  RatingOutcome rate_detailed(const Scenario& scenario);

 private:
  struct Reply {
    std::string content;
    int retries = 0;
  };
  Reply complete(const std::vector<std::pair<std::string, std::string>>& messages);
  HttpReply send_with_limits(const std::string& body);
  std::chrono::duration<double> jittered(int attempt);

  RemoteSettings settings_;
  JudgeCombination combo_;
  HttpTransport transport_;
  Sleeper sleeper_;
  std::string id_;

  std::unique_ptr<std::counting_semaphore<256>> slots_;
  mutable std::mutex mutex_;
  Rng jitter_;
  std::chrono::steady_clock::time_point next_slot_{};
  TokenUsage usage_;
};

}  // namespace polopt

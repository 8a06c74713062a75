#include "polopt/remote.hpp"

#include <cmath>
#include <cstdlib>
#include <fmt/format.h>
#include <thread>

#include "httplib.h"
#include "json.hpp"

#include "polopt/error.hpp"
#include "polopt/prompts.hpp"

namespace polopt {

using nlohmann::json;

namespace {

constexpr std::string_view kReprompt =
    "Your previous reply could not be read ({}). Output only a single line in the exact format "
    "J1: Severity; Magnitude; Plausibility: X.Y; A.B; C.D;, J2: Severity; Magnitude; "
    "Plausibility: X.Y; A.B; C.D; ... J5: Severity; Magnitude; Plausibility: X.Y; A.B; C.D; "
    "(one decimal).";

bool retryable(const HttpReply& r) {
  return r.status == 0 || r.status == 408 || r.status == 429 || r.status >= 500;
}

HttpTransport http_transport(const RemoteSettings& s, std::string api_key) {
  return [endpoint = s.endpoint, path = s.path, timeout = s.timeout_s,
          key = std::move(api_key)](const std::string& body) -> HttpReply {
    httplib::Client client(endpoint);
    const auto t = std::chrono::duration_cast<std::chrono::milliseconds>(
        std::chrono::duration<double>(timeout));
    client.set_connection_timeout(t);
    client.set_read_timeout(t);
    client.set_write_timeout(t);
    httplib::Headers headers{{"Authorization", "Bearer " + key}};
    auto res = client.Post(path, headers, body, "application/json");
    if (!res) return {0, "", httplib::to_string(res.error())};
    return {res->status, res->body, ""};
  };
}

std::string judges_tag(const std::vector<int>& js) {
  std::string out;
  for (int j : js) out += std::to_string(j);
  return out;
}

}  // namespace

RemoteEvaluator::RemoteEvaluator(RemoteSettings settings, HttpTransport transport, Sleeper sleeper)
    : settings_(std::move(settings)),
      transport_(std::move(transport)),
      sleeper_(std::move(sleeper)),
      jitter_(settings_.jitter_seed) {
  combo_ = {settings_.severity_judges, settings_.magnitude_judges, settings_.plausibility_judges};
  try {
    combo_.validate();
  } catch (const ValidationError& e) {
    throw ConfigError(e.what());
  }
  if (settings_.max_concurrency < 1 || settings_.max_concurrency > 256) {
    throw ConfigError("remote max_concurrency must be in 1..256");
  }
  if (settings_.rpm_budget < 1) throw ConfigError("remote rpm_budget must be >= 1");
  if (settings_.max_retries < 0) throw ConfigError("remote max_retries must be >= 0");
  if (settings_.model.empty()) throw ConfigError("remote evaluator needs a model id");
  if (!transport_) {
    if (settings_.endpoint.empty()) throw ConfigError("remote evaluator needs an endpoint");
    const char* key = std::getenv(settings_.api_key_env.c_str());
    if (key == nullptr || *key == '\0') {
      throw ConfigError(fmt::format("environment variable {} is not set", settings_.api_key_env));
    }
    transport_ = http_transport(settings_, key);
  }
  if (!sleeper_) {
    sleeper_ = [](std::chrono::duration<double> d) { std::this_thread::sleep_for(d); };
  }
  slots_ = std::make_unique<std::counting_semaphore<256>>(settings_.max_concurrency);

  id_ = fmt::format("remote/{}/{}/prompt={}/sev={}/mag={}/plaus={}", settings_.model,
                    settings_.reasoning_effort.empty() ? "default" : settings_.reasoning_effort,
                    settings_.prompt_version, judges_tag(combo_.severity),
                    judges_tag(combo_.magnitude), judges_tag(combo_.plausibility));
  if (settings_.temperature) id_ += fmt::format("/t={:.17g}", *settings_.temperature);
}

RemoteEvaluator::~RemoteEvaluator() = default;

TokenUsage RemoteEvaluator::usage() const {
  std::lock_guard lock(mutex_);
  return usage_;
}

std::chrono::duration<double> RemoteEvaluator::jittered(int attempt) {
  double u;
  {
    std::lock_guard lock(mutex_);
    u = jitter_.uniform01();
  }
  const double base = settings_.backoff_base_s * std::ldexp(1.0, attempt);
  return std::chrono::duration<double>(base * (0.9 + 0.2 * u));
}

HttpReply RemoteEvaluator::send_with_limits(const std::string& body) {
  slots_->acquire();
  struct Release {
    std::counting_semaphore<256>& s;
    ~Release() { s.release(); }
  } release{*slots_};

  std::chrono::steady_clock::time_point slot;
  {
    std::lock_guard lock(mutex_);
    const auto now = std::chrono::steady_clock::now();
    slot = std::max(now, next_slot_);
    next_slot_ = slot + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                            std::chrono::duration<double>(60.0 / settings_.rpm_budget));
  }
  const auto wait = slot - std::chrono::steady_clock::now();
  if (wait > std::chrono::steady_clock::duration::zero()) sleeper_(wait);
  return transport_(body);
}

RemoteEvaluator::Reply RemoteEvaluator::complete(
    const std::vector<std::pair<std::string, std::string>>& messages) {
  json request{{"model", settings_.model}, {"messages", json::array()}};
  for (const auto& [role, content] : messages) {
    request["messages"].push_back({{"role", role}, {"content", content}});
  }
  if (!settings_.reasoning_effort.empty()) {
    request["reasoning_effort"] = settings_.reasoning_effort;
  }
  if (settings_.temperature) request["temperature"] = *settings_.temperature;
  const std::string body = request.dump();

  HttpReply reply;
  int attempt = 0;
  for (;; ++attempt) {
    reply = send_with_limits(body);
    if (reply.status >= 200 && reply.status < 300) break;
    if (!retryable(reply)) {
      throw TransportError(fmt::format("endpoint returned HTTP {}: {}", reply.status,
                                       reply.body.substr(0, 500)));
    }
    if (attempt >= settings_.max_retries) {
      throw TransportError(fmt::format(
          "request failed after {} attempts: {}", attempt + 1,
          reply.status == 0 ? reply.error : fmt::format("HTTP {}", reply.status)));
    }
    sleeper_(jittered(attempt));
  }

  json doc;
  try {
    doc = json::parse(reply.body);
  } catch (const json::exception& e) {
    throw EvaluationError(fmt::format("endpoint reply is not JSON: {}", e.what()));
  }
  Reply out;
  out.retries = attempt;
  try {
    out.content = doc.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception&) {
    throw EvaluationError("endpoint reply has no choices[0].message.content");
  }
  TokenUsage u;
  u.requests = static_cast<std::uint64_t>(attempt) + 1;
  if (doc.contains("usage") && doc["usage"].is_object()) {
    u.prompt_tokens = doc["usage"].value("prompt_tokens", std::uint64_t{0});
    u.completion_tokens = doc["usage"].value("completion_tokens", std::uint64_t{0});
  }
  std::lock_guard lock(mutex_);
  usage_ += u;
  return out;
}

Scenario RemoteEvaluator::rewrite(const Scenario& scenario, std::span<const Sap> selected) {
  Scenario out = rewritten_shell(scenario, selected);
  Reply reply = complete({{"user", build_rewrite_prompt(scenario, selected)}});
  if (reply.content.find_first_not_of(" \t\r\n") == std::string::npos) {
    throw EvaluationError(fmt::format("empty rewrite for scenario {}", scenario.id));
  }
  out.body = std::move(reply.content);
  return out;
}

RatingOutcome RemoteEvaluator::rate_detailed(const Scenario& scenario) {
  const std::string prompt = build_rating_prompt(scenario);
  RatingOutcome out;
  Reply first = complete({{"user", prompt}});
  out.transport_retries += first.retries;
  out.raw_replies.push_back(first.content);
  try {
    out.panel = parse_panel_output(first.content);
  } catch (const PanelParseError& e) {
    out.reprompts = 1;
    Reply second = complete({{"user", prompt},
                             {"assistant", first.content},
                             {"user", fmt::format(fmt::runtime(kReprompt), e.what())}});
    out.transport_retries += second.retries;
    out.raw_replies.push_back(second.content);
    try {
      out.panel = parse_panel_output(second.content);
    } catch (const PanelParseError& e2) {
      throw EvaluationError(fmt::format(
          "judge panel reply unparseable after re-prompt ({}); replies: [{}] [{}]", e2.what(),
          first.content, second.content));
    }
  }
  out.ratings = combine_judges(out.panel, combo_);
  return out;
}

ScenarioRatings RemoteEvaluator::rate(const Scenario& scenario) {
  return rate_detailed(scenario).ratings;
}

}  // namespace polopt

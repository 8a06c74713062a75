#include "polopt/cache.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <fmt/format.h>
#include <map>
#include <sstream>

#include "polopt/error.hpp"
#include "polopt/prompts.hpp"
#include "polopt/rng.hpp"

namespace polopt {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string key_of(const json& rec) {
  const std::vector<int> saps = rec.at("saps").get<std::vector<int>>();
  return CacheStore::make_key(rec.at("kind").get<std::string>(),
                              rec.at("evaluator").get<std::string>(),
                              parse_impact(rec.at("impact").get<std::string>()),
                              rec.at("scenario").get<std::string>(), saps,
                              rec.at("digest").get<std::string>());
}

void check_record(const json& rec) {
  const std::string kind = rec.at("kind").get<std::string>();
  if (kind == "rewrite") {
    (void)rec.at("body").get<std::string>();
  } else if (kind == "rate") {
    const json& r = rec.at("ratings");
    for (const char* f : {"severity", "magnitude", "plausibility"}) {
      const double v = r.at(f).get<double>();
      if (v < 1.0 || v > 5.0) throw std::out_of_range(fmt::format("{} {} outside [1, 5]", f, v));
    }
  } else {
    throw std::invalid_argument(fmt::format("unknown kind '{}'", kind));
  }
}

std::string digest(std::string_view text) { return fmt::format("{:016x}", fnv1a(text)); }

std::string policy_digest(std::span<const Sap> selected) {
  std::vector<const Sap*> sorted;
  for (const Sap& s : selected) sorted.push_back(&s);
  std::sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return a->id < b->id; });
  std::string text;
  for (const Sap* s : sorted) text += policy_line(*s) + "\n";
  return digest(text);
}

}  // namespace

std::shared_ptr<CacheStore> CacheStore::open(const fs::path& path) {
  static std::mutex registry_mutex;
  static std::map<fs::path, std::weak_ptr<CacheStore>> registry;

  const fs::path canonical = fs::weakly_canonical(fs::absolute(path));
  std::lock_guard lock(registry_mutex);
  if (auto it = registry.find(canonical); it != registry.end()) {
    if (auto live = it->second.lock()) return live;
  }
  auto store = std::make_shared<CacheStore>(canonical);
  registry[canonical] = store;
  return store;
}

CacheStore::CacheStore(fs::path path) : path_(std::move(path)) {
  if (path_.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path_.parent_path(), ec);
  }
  if (fs::exists(path_)) {
    std::ifstream in(path_, std::ios::binary);
    if (!in) throw IoError(fmt::format("cache {}: cannot open for reading", path_.string()));
    std::stringstream buf;
    buf << in.rdbuf();
    const std::string data = buf.str();

    std::size_t pos = 0;
    std::size_t line_no = 0;
    std::uintmax_t good_end = 0;
    while (pos < data.size()) {
      const std::size_t nl = data.find('\n', pos);
      ++line_no;
      if (nl == std::string::npos) break;  // torn tail
      const std::string_view line(data.data() + pos, nl - pos);
      pos = nl + 1;
      if (line.find_first_not_of(" \t\r") == std::string_view::npos) {
        good_end = pos;
        continue;
      }
      try {
        json rec = json::parse(line);
        check_record(rec);
        records_.emplace(key_of(rec), std::move(rec));
      } catch (const std::exception& e) {
        throw IoError(fmt::format("cache {}: corrupt record at line {}: {}", path_.string(),
                                  line_no, e.what()));
      }
      good_end = pos;
    }
    if (good_end < data.size()) fs::resize_file(path_, good_end);
  }
  out_.open(path_, std::ios::app | std::ios::binary);
  if (!out_) throw IoError(fmt::format("cache {}: cannot open for appending", path_.string()));
}

std::string CacheStore::make_key(std::string_view kind, std::string_view evaluator, Impact impact,
                                 std::string_view scenario, std::span<const int> saps,
                                 std::string_view digest) {
  std::string key = fmt::format("{}\x1f{}\x1f{}\x1f{}\x1f", kind, evaluator, to_string(impact),
                                scenario);
  for (int id : saps) key += fmt::format("{},", id);
  key += '\x1f';
  key += digest;
  return key;
}

std::optional<json> CacheStore::find(const std::string& key) const {
  std::shared_lock lock(mutex_);
  if (auto it = records_.find(key); it != records_.end()) return it->second;
  return std::nullopt;
}

bool CacheStore::insert(const std::string& key, json record) {
  std::unique_lock lock(mutex_);
  if (records_.contains(key)) return false;
  out_ << record.dump() << '\n';
  out_.flush();
  if (!out_) throw IoError(fmt::format("cache {}: write failed", path_.string()));
  records_.emplace(key, std::move(record));
  return true;
}

std::size_t CacheStore::size() const {
  std::shared_lock lock(mutex_);
  return records_.size();
}

CachedEvaluator::CachedEvaluator(EvaluatorPtr inner, std::shared_ptr<CacheStore> store)
    : inner_(std::move(inner)), store_(std::move(store)), inner_id_(inner_->id()) {}

Scenario CachedEvaluator::rewrite(const Scenario& scenario, std::span<const Sap> selected) {
  Scenario shell = rewritten_shell(scenario, selected);
  const std::string dg = policy_digest(selected);
  const std::string key =
      CacheStore::make_key("rewrite", inner_id_, scenario.impact, scenario.id, shell.policy, dg);
  if (auto rec = store_->find(key)) {
    ++hits_;
    shell.body = rec->at("body").get<std::string>();
    return shell;
  }
  ++misses_;
  const TokenUsage before = inner_->usage();
  Scenario out = inner_->rewrite(scenario, selected);
  const TokenUsage after = inner_->usage();
  store_->insert(key, json{{"kind", "rewrite"},
                           {"evaluator", inner_id_},
                           {"impact", to_string(scenario.impact)},
                           {"scenario", scenario.id},
                           {"saps", shell.policy},
                           {"digest", dg},
                           {"body", out.body},
                           {"usage",
                            {{"prompt_tokens", after.prompt_tokens - before.prompt_tokens},
                             {"completion_tokens",
                              after.completion_tokens - before.completion_tokens}}},
                           {"timestamp", utc_timestamp()}});
  return out;
}

ScenarioRatings CachedEvaluator::rate(const Scenario& scenario) {
  const bool rewritten = scenario.kind == ScenarioKind::rewritten;
  const std::string& sid = rewritten && scenario.parent_id ? *scenario.parent_id : scenario.id;
  const std::vector<int> saps = rewritten ? scenario.policy : std::vector<int>{};
  const std::string dg = digest(scenario.body);
  const std::string key = CacheStore::make_key("rate", inner_id_, scenario.impact, sid, saps, dg);
  if (auto rec = store_->find(key)) {
    ++hits_;
    const json& r = rec->at("ratings");
    return {r.at("severity").get<double>(), r.at("magnitude").get<double>(),
            r.at("plausibility").get<double>()};
  }
  ++misses_;
  const TokenUsage before = inner_->usage();
  const ScenarioRatings out = inner_->rate(scenario);
  const TokenUsage after = inner_->usage();
  store_->insert(key, json{{"kind", "rate"},
                           {"evaluator", inner_id_},
                           {"impact", to_string(scenario.impact)},
                           {"scenario", sid},
                           {"saps", saps},
                           {"digest", dg},
                           {"ratings",
                            {{"severity", out.severity},
                             {"magnitude", out.magnitude},
                             {"plausibility", out.plausibility}}},
                           {"usage",
                            {{"prompt_tokens", after.prompt_tokens - before.prompt_tokens},
                             {"completion_tokens",
                              after.completion_tokens - before.completion_tokens}}},
                           {"timestamp", utc_timestamp()}});
  return out;
}

}  // namespace polopt

#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <unordered_map>

#include "json.hpp"

#include "polopt/evaluator.hpp"

namespace polopt {

// Append-only JSON-lines store. One record per line:
//   {"kind": "rewrite"|"rate", "evaluator", "impact", "scenario", "saps",
//    "digest", "body" | "ratings", "usage", "timestamp"}
// "digest" hashes the text the inner evaluator saw (the policy lines for a
// rewrite, the scenario body for a rating), so the same ids drawn from a
// different table never collide.
// A complete line that fails to parse makes open() throw IoError naming the
// line; a torn final line (no newline, left by an interrupted write) is
// dropped and truncated away.
class CacheStore {
 public:
  // Instances are shared per canonical path within the process.
  static std::shared_ptr<CacheStore> open(const std::filesystem::path& path);

  explicit CacheStore(std::filesystem::path path);

  std::optional<nlohmann::json> find(const std::string& key) const;
  // Appends unless the key is already present. Returns false when it was.
  bool insert(const std::string& key, nlohmann::json record);

  std::size_t size() const;
  const std::filesystem::path& path() const noexcept { return path_; }

  static std::string make_key(std::string_view kind, std::string_view evaluator, Impact impact,
                              std::string_view scenario, std::span<const int> saps,
                              std::string_view digest);

 private:
  std::filesystem::path path_;
  mutable std::shared_mutex mutex_;
  std::unordered_map<std::string, nlohmann::json> records_;
  std::ofstream out_;
};

// Memoizes rewrite/rate of an inner evaluator by
// (inner.id(), impact, scenario id, sorted SAP ids, digest).
class CachedEvaluator final : public Evaluator {
 public:
  CachedEvaluator(EvaluatorPtr inner, std::shared_ptr<CacheStore> store);

  Scenario rewrite(const Scenario& scenario, std::span<const Sap> selected) override;
  ScenarioRatings rate(const Scenario& scenario) override;
  std::string id() const override { return inner_->id(); }
  TokenUsage usage() const override { return inner_->usage(); }

  std::uint64_t hits() const noexcept { return hits_.load(); }
  std::uint64_t misses() const noexcept { return misses_.load(); }
  const std::shared_ptr<CacheStore>& store() const noexcept { return store_; }

 private:
  EvaluatorPtr inner_;
  std::shared_ptr<CacheStore> store_;
  std::string inner_id_;
  std::atomic<std::uint64_t> hits_{0};
  std::atomic<std::uint64_t> misses_{0};
};

}  // namespace polopt

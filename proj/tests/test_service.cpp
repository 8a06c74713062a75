#include "doctest.h"

#include <mutex>
#include <thread>

#include "httplib.h"
#include "json.hpp"

#include "polopt/manifest.hpp"
#include "polopt/service.hpp"
#include "support.hpp"

using namespace polopt;
using nlohmann::json;
using namespace std::chrono_literals;

namespace {

RunConfig quick_config(std::uint64_t seed = 1) {
  RunConfig c;
  c.label = "quick";
  c.seed = seed;
  c.calibration_samples = 100;
  c.max_generations = 12;
  return c;
}

// Runs until cancelled.
RunConfig endless_config() {
  RunConfig c = quick_config();
  c.label = "endless";
  c.stall_generations = 1'000'000;
  c.max_generations = 1'000'000;
  return c;
}

std::shared_ptr<const DatasetBundle> shared_bundle() {
  return std::make_shared<const DatasetBundle>(testing::bundle());
}

RunSnapshot wait_terminal(const RunRegistry& reg, const std::string& id) {
  const auto deadline = std::chrono::steady_clock::now() + 60s;
  for (;;) {
    auto s = reg.wait(id, std::numeric_limits<std::size_t>::max(), 100ms);
    REQUIRE(s);
    if (is_terminal(s->state)) return *s;
    REQUIRE(std::chrono::steady_clock::now() < deadline);
  }
}

void wait_state_not(const RunRegistry& reg, const std::string& id, RunState state) {
  const auto deadline = std::chrono::steady_clock::now() + 30s;
  while (reg.get(id)->state == state) {
    REQUIRE(std::chrono::steady_clock::now() < deadline);
    std::this_thread::sleep_for(5ms);
  }
}

// A Service listening on a free port for the duration of a test.
struct LiveService {
  explicit LiveService(const std::filesystem::path& run_dir, int queue_cap = 16) {
    ServiceOptions o;
    o.port = 0;
    o.data_dir = testing::data_dir();
    o.run_dir = run_dir;
    o.queue_cap = queue_cap;
    service = std::make_unique<Service>(o);
    port = service->bind();
    thread = std::thread([this] { service->listen(); });
  }
  ~LiveService() {
    service->stop();
    thread.join();
  }
  httplib::Client client() const {
    httplib::Client c("127.0.0.1", port);
    c.set_read_timeout(60, 0);
    return c;
  }

  std::unique_ptr<Service> service;
  int port = 0;
  std::thread thread;
};

}  // namespace

TEST_CASE("registry runs a config to the same manifest as a direct run") {
  testing::TempDir dir;
  RunRegistry reg(shared_bundle(), {}, dir.path(), 2, 4);
  const std::string id = reg.submit(quick_config());
  const RunSnapshot s = wait_terminal(reg, id);
  REQUIRE(s.state == RunState::done);
  REQUIRE(s.manifest);
  CHECK(*s.manifest == manifest_text(execute_run(quick_config(), testing::bundle())));
  CHECK(s.generations.size() == json::parse(*s.manifest).at("generations").size());
  CHECK(testing::read_file(dir / id / "manifest.json") == *s.manifest);
  CHECK(reg.cancel(id) == RunRegistry::CancelOutcome::terminal);
  CHECK(reg.cancel("nope") == RunRegistry::CancelOutcome::unknown);
  CHECK_FALSE(reg.get("nope"));
}

TEST_CASE("registry rejects configs that cannot run") {
  testing::TempDir dir;
  RunRegistry reg(shared_bundle(), {}, dir.path(), 1, 4);
  RunConfig c = quick_config();
  c.gene_ids = std::vector{999};
  CHECK_THROWS_AS(reg.submit(c), Error);
  CHECK(reg.list().empty());
}

TEST_CASE("cancel and queue limits") {
  testing::TempDir dir;
  RunRegistry reg(shared_bundle(), {}, dir.path(), 1, 1);
  const std::string running = reg.submit(endless_config());
  wait_state_not(reg, running, RunState::queued);
  const std::string waiting = reg.submit(quick_config());
  CHECK(reg.get(waiting)->state == RunState::queued);
  CHECK_THROWS_AS(reg.submit(quick_config()), QueueFullError);

  // A queued run can be cancelled without ever starting.
  CHECK(reg.cancel(waiting) == RunRegistry::CancelOutcome::cancelled);
  CHECK(reg.get(waiting)->state == RunState::cancelled);
  CHECK(reg.cancel(waiting) == RunRegistry::CancelOutcome::terminal);

  CHECK(reg.cancel(running) == RunRegistry::CancelOutcome::cancelled);
  CHECK(wait_terminal(reg, running).state == RunState::cancelled);
  CHECK_FALSE(std::filesystem::exists(dir / running / "manifest.json"));

  const std::string after = reg.submit(quick_config());
  CHECK(wait_terminal(reg, after).state == RunState::done);
  CHECK(reg.list().size() == 3);
}

TEST_CASE("finished runs are reloaded at startup") {
  testing::TempDir dir;
  std::string id;
  std::string manifest;
  {
    RunRegistry reg(shared_bundle(), {}, dir.path(), 1, 4);
    id = reg.submit(quick_config());
    manifest = *wait_terminal(reg, id).manifest;
  }
  RunRegistry again(shared_bundle(), {}, dir.path(), 1, 4);
  const auto s = again.get(id);
  REQUIRE(s);
  CHECK(s->state == RunState::done);
  CHECK(*s->manifest == manifest);
  CHECK(s->config == quick_config());
}

TEST_CASE("read-only endpoints") {
  testing::TempDir dir;
  LiveService svc(dir.path());
  httplib::Client cli = svc.client();

  auto health = cli.Get("/health");
  REQUIRE(health);
  CHECK(health->status == 200);
  CHECK(json::parse(health->body) == json{{"status", "ok"}});
  CHECK(health->get_header_value("Access-Control-Allow-Origin") == "*");

  auto datasets = cli.Get("/datasets");
  REQUIRE(datasets);
  const json d = json::parse(datasets->body);
  CHECK(d.at("version") == testing::bundle().version);
  REQUIRE(d.at("datasets").size() == 4);
  CHECK(d.at("datasets")[0].at("saps") == 31);
  CHECK(d.at("datasets")[0].at("feasible") == 22);

  auto saps = cli.Get("/datasets/political_manipulation/saps");
  REQUIRE(saps);
  const json s = json::parse(saps->body);
  REQUIRE(s.size() == 31);
  CHECK(s[0].at("id") == 1);
  CHECK(s[0].at("score") == 19.74);
  CHECK(s[0].at("cost") == 2.0);

  auto combined = cli.Get("/datasets/combined/saps");
  REQUIRE(combined);
  CHECK(json::parse(combined->body).size() == 62);

  auto unknown = cli.Get("/datasets/weather/saps");
  REQUIRE(unknown);
  CHECK(unknown->status == 404);
  CHECK(cli.Get("/runs/nope")->status == 404);
  CHECK(cli.Get("/runs/nope/result")->status == 404);
  CHECK(cli.Delete("/runs/nope")->status == 404);
  CHECK(json::parse(cli.Get("/runs")->body).empty());
}

TEST_CASE("run lifecycle over HTTP") {
  testing::TempDir dir;
  LiveService svc(dir.path());
  httplib::Client cli = svc.client();

  auto bad = cli.Post("/runs", R"({"weights": {"alpha": 0, "beta": 0, "gamma": 0}})", "application/json");
  REQUIRE(bad);
  CHECK(bad->status == 400);
  CHECK(json::parse(bad->body).contains("error"));
  CHECK(cli.Post("/runs", "{not json", "application/json")->status == 400);
  CHECK(cli.Post("/runs", R"({"bogus": 1})", "application/json")->status == 400);

  auto created = cli.Post("/runs", to_json(quick_config()).dump(), "application/json");
  REQUIRE(created);
  REQUIRE(created->status == 202);
  const json handle = json::parse(created->body);
  const std::string id = handle.at("run_id");
  CHECK(handle.at("impact") == "political_manipulation");
  CHECK(handle.at("label") == "quick");

  // The event stream replays every generation and ends with the final state.
  std::string stream;
  auto events = cli.Get("/runs/" + id + "/events", [&](const char* data, std::size_t n) {
    stream.append(data, n);
    return true;
  });
  REQUIRE(events);
  CHECK(events->status == 200);
  std::size_t gen_events = 0;
  for (auto p = stream.find("event: generation"); p != std::string::npos;
       p = stream.find("event: generation", p + 1)) {
    ++gen_events;
  }
  CHECK(stream.find("event: end\ndata: {\"state\":\"done\"}") != std::string::npos);

  auto status = cli.Get("/runs/" + id);
  REQUIRE(status);
  const json h = json::parse(status->body);
  CHECK(h.at("state") == "done");
  CHECK(h.at("generations") == gen_events);
  CHECK(h.at("config") == json::parse(to_json(quick_config()).dump()));

  auto result = cli.Get("/runs/" + id + "/result");
  REQUIRE(result);
  CHECK(result->status == 200);
  CHECK(result->body == manifest_text(execute_run(quick_config(), testing::bundle())));
  CHECK(json::parse(result->body).at("generations").size() == gen_events);

  CHECK(cli.Delete("/runs/" + id)->status == 409);
  const json listed = json::parse(cli.Get("/runs")->body);
  REQUIRE(listed.size() == 1);
  CHECK_FALSE(listed[0].contains("config"));
}

TEST_CASE("cancel over HTTP") {
  testing::TempDir dir;
  LiveService svc(dir.path());
  httplib::Client cli = svc.client();
  auto a = cli.Post("/runs", to_json(endless_config()).dump(), "application/json");
  REQUIRE(a);
  REQUIRE(a->status == 202);
  const std::string id = json::parse(a->body).at("run_id");
  CHECK(cli.Get("/runs/" + id + "/result")->status == 409);

  auto cancelled = cli.Delete("/runs/" + id);
  REQUIRE(cancelled);
  CHECK(cancelled->status == 200);
  CHECK(json::parse(cancelled->body).at("state") == "cancelled");
  CHECK(cli.Delete("/runs/" + id)->status == 409);
}

TEST_CASE("queue full maps to 429") {
  testing::TempDir dir;
  ServiceOptions o;
  o.port = 0;
  o.data_dir = testing::data_dir();
  o.run_dir = dir.path();
  o.max_concurrent = 1;
  o.queue_cap = 1;
  Service service(o);
  const int port = service.bind();
  std::thread t([&] { service.listen(); });
  RunRegistry& reg = service.registry();
  const std::string running = reg.submit(endless_config());
  wait_state_not(reg, running, RunState::queued);
  reg.submit(endless_config());

  httplib::Client cli("127.0.0.1", port);
  auto full = cli.Post("/runs", to_json(quick_config()).dump(), "application/json");
  REQUIRE(full);
  CHECK(full->status == 429);
  service.stop();
  t.join();
}

TEST_CASE("service refuses a missing data directory") {
  ServiceOptions o;
  o.data_dir = "/nonexistent/polopt-data";
  CHECK_THROWS_AS(Service{o}, IoError);
}

TEST_CASE("burst submissions, responsive health and partial history on cancel") {
  testing::TempDir dir;
  LiveService svc(dir.path());
  httplib::Client cli = svc.client();

  std::vector<std::string> accepted;
  int rejected = 0;
  std::vector<std::string> errors;
  std::mutex m;
  std::vector<std::thread> clients;
  for (int i = 0; i < 50; ++i) {
    clients.emplace_back([&] {
      httplib::Client c("127.0.0.1", svc.port);
      auto r = c.Post("/runs", to_json(endless_config()).dump(), "application/json");
      std::lock_guard lock(m);
      if (!r) {
        errors.push_back(httplib::to_string(r.error()));
        return;
      }
      if (r->status == 202) {
        accepted.push_back(json::parse(r->body).at("run_id"));
      } else {
        CHECK(r->status == 429);
        ++rejected;
      }
    });
  }
  for (auto& t : clients) t.join();
  CHECK(errors.empty());
  if (!errors.empty()) MESSAGE(errors.front());
  CHECK(rejected > 0);
  CHECK(accepted.size() <= 2 + 16);

  // Two runs are busy evolving; health still answers quickly.
  const auto t0 = std::chrono::steady_clock::now();
  auto health = cli.Get("/health");
  const auto elapsed = std::chrono::steady_clock::now() - t0;
  REQUIRE(health);
  CHECK(health->status == 200);
  CHECK(elapsed < 100ms);

  RunRegistry& reg = svc.service->registry();
  std::string evolving;
  const auto deadline = std::chrono::steady_clock::now() + 30s;
  while (evolving.empty()) {
    for (const std::string& id : accepted) {
      const auto s = reg.get(id);
      if (s->state == RunState::evolving && !s->generations.empty()) evolving = id;
    }
    REQUIRE(std::chrono::steady_clock::now() < deadline);
    std::this_thread::sleep_for(5ms);
  }
  auto cancelled = cli.Delete("/runs/" + evolving);
  REQUIRE(cancelled);
  CHECK(cancelled->status == 200);
  const json h = json::parse(cancelled->body);
  CHECK(h.at("state") == "cancelled");
  CHECK(h.at("generations").get<int>() > 0);
  CHECK_FALSE(h.at("progress").is_null());

  for (const std::string& id : accepted) reg.cancel(id);
}

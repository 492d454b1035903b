#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <thread>

#include <httplib.h>

#include "ibn/config.hpp"
#include "ibn/error.hpp"
#include "ibn/fleet.hpp"
#include "ibn/orchestrator.hpp"
#include "support.hpp"

using namespace ibn;
using nlohmann::json;
namespace role = ibn::a2a::role;

namespace {

std::string error_code(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return "none";
}

PipelineRecord record_with(std::map<std::string, double> ms) {
  PipelineRecord r;
  for (const auto& [who, t] : ms) r.timings.push_back({who, "x", 1, 0, 0, t});
  return r;
}

std::unique_ptr<Fleet> in_process(SystemConfig cfg = {}) { return Fleet::start(cfg, Fleet::Mode::kInProcess); }

// Registry on ephemeral ports so HTTP tests never collide.
SystemConfig ephemeral_config() {
  auto cfg = config_from_json(json::object());
  int port = 0;
  a2a::AgentRegistry reg;
  for (const char* r : {role::kIntentUi, role::kJunior1, role::kJunior2, role::kSenior, role::kPolicy, role::kMcpState}) {
    auto probe = a2a::serve(r, "127.0.0.1", 0, [](const a2a::Envelope& e) { return e; });
    port = probe->port();
    probe->stop();
    reg.set(r, {"127.0.0.1", port});
  }
  cfg.registry = reg;
  return cfg;
}

}  // namespace

TEST_SUITE("orchestrator") {
  TEST_CASE("time distribution arithmetic") {
    const auto one = time_distribution({record_with({{"intent_ui", 13}, {"junior_1", 3.5}, {"junior_2", 3.5},
                                                     {"senior", 51}, {"policy", 29}})},
                                       1);
    REQUIRE(one.size() == 1);
    CHECK(one[0].percentages.at("intent_ui") == 13.0);
    CHECK(one[0].percentages.at("junior_both") == 7.0);
    CHECK(one[0].percentages.at("senior") == 51.0);
    CHECK(one[0].percentages.at("policy") == 29.0);

    const auto eq = time_distribution({record_with({{"intent_ui", 1}, {"junior_1", 0.5}, {"junior_2", 0.5},
                                                    {"senior", 1}, {"policy", 1}})},
                                      1);
    for (const auto& [r, p] : eq[0].percentages) CHECK(p == 25.0);

    const auto solo = time_distribution({record_with({{"senior", 9}})}, 1);
    CHECK(solo[0].percentages.at("senior") == 100.0);
    CHECK(solo[0].percentages.at("policy") == 0.0);

    // mcp_state time is not an agent row; it is folded into intent_ui by the orchestrator.
    const auto extra = time_distribution({record_with({{"senior", 1}, {"mcp_state", 5}})}, 1);
    CHECK(extra[0].total_ms == 1.0);

    CHECK(error_code([] { time_distribution({}, 1); }) == errc::kNoRecords);
    CHECK(error_code([] { time_distribution({PipelineRecord{}}, 2); }) == errc::kNoRecords);
  }

  TEST_CASE("iterations are consecutive groups") {
    std::vector<PipelineRecord> rs;
    for (int i = 0; i < 6; ++i) rs.push_back(record_with({{"senior", i < 3 ? 1.0 : 0.0}, {"policy", i < 3 ? 0.0 : 1.0}}));
    const auto d = time_distribution(rs, 2);
    CHECK(d[0].runs == 3);
    CHECK(d[0].percentages.at("senior") == 100.0);
    CHECK(d[1].percentages.at("policy") == 100.0);
  }

  TEST_CASE("percentages sum to 100 within rounding") {
    ibn::Rng rng(17);
    for (int trial = 0; trial < 200; ++trial) {
      const auto d = time_distribution({record_with({{"intent_ui", rng.uniform(0, 10)},
                                                     {"junior_1", rng.uniform(0, 10)},
                                                     {"junior_2", rng.uniform(0, 10)},
                                                     {"senior", rng.uniform(0, 10)},
                                                     {"policy", rng.uniform(0, 10)}})},
                                       1);
      double sum = 0;
      for (const auto& [r, p] : d[0].percentages) sum += p;
      CHECK(std::abs(sum - 100.0) <= 1.0);
    }
  }

  TEST_CASE("strip_volatile drops clocks only") {
    const json rec{{"task_id", "t"}, {"timings", {1}}, {"x", {{"timestamp", "now"}, {"y", 2}}}, {"total_ms", 3}};
    CHECK(strip_volatile(rec) == json{{"task_id", "t"}, {"x", {{"y", 2}}}});
  }

  TEST_CASE("end-to-end mock run") {
    auto fleet = in_process();
    const auto rec = fleet->orchestrator().run_pipeline("URLLC factory control, 4 sites");
    REQUIRE(rec.status == PipelineStatus::kCompleted);
    const auto& pr = rec.phase_results;
    CHECK(pr["routing_decision"]["strategy"] == "DUAL");
    CHECK(pr["consensus"]["chosen"]["topology"]["kind"] == "FULL_MESH");
    CHECK(pr["consensus"]["chosen"]["topology"]["nodes"].size() == 4);
    CHECK(pr["validation_reports_phase1"].size() == 1);
    CHECK(pr["validation_reports_phase2"].size() == 1);
    CHECK(pr["route_artifacts"]["paths"].size() == 12);
    CHECK(fleet->state().snapshot()->deployments.size() == 3);

    std::set<std::string> roles;
    for (const auto& e : fleet->log().query(rec.task_id)) {
      roles.insert(e.from_agent);
      roles.insert(e.to_agent);
    }
    for (const char* r : {role::kIntentUi, role::kJunior1, role::kJunior2, role::kSenior, role::kPolicy, role::kMcpState}) {
      CHECK(roles.count(r) == 1);
    }
    CHECK(replay_phase_results(fleet->log().all(), rec.task_id).dump() == pr.dump());
    CHECK(error_code([&] { fleet->orchestrator().run_pipeline("  "); }) == errc::kIntentEmpty);
  }

  TEST_CASE("sensor intents route with SPF") {
    auto fleet = in_process();
    const auto rec = fleet->orchestrator().run_pipeline("massive sensor metering network");
    REQUIRE(rec.status == PipelineStatus::kCompleted);
    CHECK(rec.phase_results["routing_decision"]["strategy"] == "SPF");
  }

  TEST_CASE("juniors run concurrently") {
    auto fleet = in_process();
    fleet->set_handler_delay(role::kJunior1, 80);
    fleet->set_handler_delay(role::kJunior2, 80);
    const auto rec = fleet->orchestrator().run_pipeline("URLLC factory control, 4 sites");
    std::vector<Timing> js;
    for (const auto& t : rec.timings) {
      if (t.agent_role == role::kJunior1 || t.agent_role == role::kJunior2) js.push_back(t);
    }
    REQUIRE(js.size() == 2);
    CHECK(std::max(js[0].started_ms, js[1].started_ms) < std::min(js[0].finished_ms, js[1].finished_ms));
  }

  TEST_CASE("always-failing instantiation exhausts phase 2") {
    auto fleet = in_process();
    emulation::FaultPlan plan;
    plan.fail_instruction = 1;
    fleet->orchestrator().set_fault_plan(plan);
    const auto rec = fleet->orchestrator().run_pipeline("URLLC factory control, 4 sites");
    CHECK(rec.status == PipelineStatus::kFailed);
    CHECK(rec.failure_code == errc::kValidationExhausted);
    CHECK(rec.phase_results["validation_reports_phase2"].size() == 3);
    CHECK(rec.phase_results["routing_decision"].is_null());
    CHECK(json(rec)["failure"]["code"] == errc::kValidationExhausted);
  }

  TEST_CASE("a cut link fails reachability until it is restored") {
    auto fleet = in_process();
    emulation::FaultPlan plan;
    plan.links_down = {link_id("n0", "n1"), link_id("n0", "n2"), link_id("n0", "n3")};
    plan.fail_attempts = std::set<int>{1};
    fleet->orchestrator().set_fault_plan(plan);
    const auto rec = fleet->orchestrator().run_pipeline("massive sensor metering network");
    REQUIRE(rec.status == PipelineStatus::kCompleted);
    const auto& reports = rec.phase_results["validation_reports_phase2"];
    REQUIRE(reports.size() == 2);
    CHECK(reports[0]["violations"][0]["code"] == violation::kUnreachablePairs);
    CHECK(reports[1]["passed"] == true);
  }

  TEST_CASE("full restart re-runs the juniors") {
    auto cfg = config_from_json(json{{"phase2_full_restart", true}});
    auto fleet = in_process(cfg);
    emulation::FaultPlan plan;
    plan.fail_instruction = 0;
    plan.fail_attempts = std::set<int>{1};
    fleet->orchestrator().set_fault_plan(plan);
    const auto rec = fleet->orchestrator().run_pipeline("URLLC factory control, 4 sites");
    REQUIRE(rec.status == PipelineStatus::kCompleted);
    int junior_calls = 0;
    for (const auto& t : rec.timings) junior_calls += t.agent_role == role::kJunior1;
    CHECK(junior_calls == 2);
  }

  TEST_CASE("a fault index past the document never fires") {
    auto fleet = in_process();
    fleet->orchestrator().set_fault_source([](int) {
      emulation::FaultPlan p;
      p.fail_instruction = 1000;  // beyond the document: never fires
      return p;
    });
    CHECK(fleet->orchestrator().run_pipeline("URLLC factory control, 4 sites").status == PipelineStatus::kCompleted);
  }

  TEST_CASE("concurrent submissions complete independently") {
    auto fleet = in_process();
    std::vector<std::string> ids;
    for (const char* t : {"URLLC robots, 4 sites", "video streaming, 6 sites", "sensor metering, 5 sites"}) {
      ids.push_back(fleet->orchestrator().submit(t));
    }
    fleet->orchestrator().wait_all();
    std::set<std::string> strategies;
    for (const auto& id : ids) {
      const auto r = fleet->orchestrator().find(id);
      REQUIRE(r.has_value());
      CHECK(r->status == PipelineStatus::kCompleted);
      strategies.insert(r->phase_results["routing_decision"]["strategy"].get<std::string>());
    }
    CHECK(strategies == std::set<std::string>{"DUAL", "SPF"});
    CHECK(fleet->orchestrator().records().size() == 3);
  }
}

TEST_SUITE("config") {
  TEST_CASE("defaults and overrides") {
    const auto c = config_from_json(json::object());
    CHECK(c.backend == "mock");
    CHECK(c.orchestrator.phase1_max_attempts == 3);
    const auto o = config_from_json(json{{"seed", 7}, {"retries", {{"phase2_max_attempts", 2}}},
                                         {"policy", {{"profiles", {{"MMTC", {{"strategy", "DUAL"}}}}}}}});
    CHECK(o.seed == 7);
    CHECK(o.orchestrator.phase2_max_attempts == 2);
    CHECK(o.policy.profiles.at(ServiceType::kMmtc).strategy == RoutingStrategy::kDual);
    const auto round = config_from_json(config_to_json(o));
    CHECK(config_to_json(round) == config_to_json(o));
  }

  TEST_CASE("bad configs") {
    CHECK(error_code([] { config_from_json(json{{"sed", 1}}); }) == errc::kConfigInvalid);
    CHECK(error_code([] { config_from_json(json{{"retries", {{"phase1_max_attempts", 0}}}}); }) == errc::kConfigInvalid);
    CHECK(error_code([] { config_from_json(json{{"backend", "magic"}}); }) == errc::kConfigInvalid);
    CHECK(error_code([] { load_config("/nonexistent/ibn.json"); }) == errc::kConfigInvalid);
    auto reg = a2a::AgentRegistry::defaults().to_json();
    reg["policy"]["port"] = 8013;
    CHECK(error_code([&] { config_from_json(json{{"registry", reg}}); }) == errc::kPortInUse);
  }
}

TEST_SUITE("fleet") {
  TEST_CASE("http fleet serves intents and reports") {
    auto cfg = ephemeral_config();
    auto fleet = Fleet::start(cfg, Fleet::Mode::kHttp);
    REQUIRE(fleet->wait_ready(std::chrono::seconds(5)));
    const auto ui = *fleet->registry().find(role::kIntentUi);
    httplib::Client cli(ui.host, ui.port);
    for (const auto& [r, addr] : fleet->registry().entries()) {
      httplib::Client h(addr.host, addr.port);
      const auto res = h.Get("/health");
      REQUIRE(res);
      CHECK(res->status == 200);
    }
    const auto posted = cli.Post("/intent", json{{"text", "URLLC slice for 4 robots"}}.dump(), "application/json");
    REQUIRE(posted);
    CHECK(posted->status == 202);
    const auto id = json::parse(posted->body)["task_id"].get<std::string>();
    fleet->orchestrator().wait_all();
    const auto got = cli.Get("/intent/" + id);
    REQUIRE(got);
    const auto rec = json::parse(got->body);
    CHECK(rec["status"] == "COMPLETED");
    CHECK(cli.Get("/intent/task-999999")->status == 404);
    CHECK(cli.Post("/intent", "{}", "application/json")->status == 400);
    const auto timing = cli.Get("/report/timing?iterations=1");
    REQUIRE(timing);
    CHECK(timing->status == 200);
    CHECK(json::parse(timing->body)["iterations"].size() == 1);
    CHECK(cli.Get("/report/timing?iterations=5")->status == 404);
    const auto mcp = *fleet->registry().find(role::kMcpState);
    httplib::Client st(mcp.host, mcp.port);
    CHECK(st.Get("/state/topology")->status == 200);
    fleet->stop();
  }

  TEST_CASE("split fleets talk over HTTP") {
    auto cfg = ephemeral_config();
    auto agents = Fleet::start(cfg, Fleet::Mode::kHttp,
                               {role::kJunior1, role::kJunior2, role::kSenior, role::kPolicy, role::kMcpState});
    CHECK_FALSE(agents->wait_ready(std::chrono::milliseconds(300)));  // no intent_ui yet
    auto ui = Fleet::start(cfg, Fleet::Mode::kHttp, {role::kIntentUi});
    CHECK(ui->wait_ready(std::chrono::seconds(5)));
    const auto rec = ui->orchestrator().run_pipeline("video streaming for a stadium, 6 sites");
    CHECK(rec.status == PipelineStatus::kCompleted);
    CHECK(agents->state().snapshot()->deployments.size() == 3);
  }
}

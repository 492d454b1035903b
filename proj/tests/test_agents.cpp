#include <doctest.h>

#include <filesystem>
#include <set>

#include "ibn/emulation.hpp"
#include "ibn/error.hpp"
#include "ibn/junior_agent.hpp"
#include "ibn/mcp_state.hpp"
#include "ibn/policy_agent.hpp"
#include "ibn/senior_agent.hpp"
#include "support.hpp"

using namespace ibn;
using nlohmann::json;

namespace {

std::string error_code(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return "none";
}

std::size_t degree(const TopologySpec& s, const std::string& id) {
  std::size_t d = 0;
  for (const auto& l : s.links) d += (l.endpoint_a == id) + (l.endpoint_b == id);
  return d;
}

JuniorProposal proposal(const std::string& agent, ServiceType svc, TopologyKind kind, int n, std::uint64_t seed = 1) {
  JuniorProposal p;
  p.agent_id = agent;
  p.intent_id = "intent-1";
  p.service_type = svc;
  p.topology = generate_topology(kind, n, seed);
  return p;
}

Intent intent(const std::string& text) { return {"intent-1", text, "2026-01-01T00:00:00Z", "test"}; }

}  // namespace

TEST_SUITE("junior_agent") {
  TEST_CASE("generator link counts") {
    for (int n = 3; n <= 8; ++n) {
      const auto full = generate_topology(TopologyKind::kFullMesh, n, 5);
      CHECK(full.links.size() == static_cast<std::size_t>(n * (n - 1) / 2));
      const auto hub = generate_topology(TopologyKind::kHubAndSpoke, n, 5);
      CHECK(hub.links.size() == static_cast<std::size_t>(n - 1));
      CHECK(degree(hub, "n0") == static_cast<std::size_t>(n - 1));
      for (const auto& s : {full, hub}) CHECK(validate_topology_spec(s).passed);
    }
    for (int n = 4; n <= 32; ++n) {
      const auto part = generate_topology(TopologyKind::kPartialMesh, n, 5);
      CHECK(oracle::spec_connected(part));
      CHECK(part.links.size() > static_cast<std::size_t>(n - 1));
      CHECK(part.links.size() < static_cast<std::size_t>(n * (n - 1) / 2));
      CHECK(validate_topology_spec(part).passed);
    }
    CHECK(error_code([] { generate_topology(TopologyKind::kFullMesh, 1, 0); }) == errc::kBadSize);
    CHECK(error_code([] { generate_topology(TopologyKind::kPartialMesh, 3, 0); }) == errc::kBadSize);
  }

  TEST_CASE("structure is independent of the attribute seed") {
    const auto a = generate_topology(TopologyKind::kPartialMesh, 9, 1);
    const auto b = generate_topology(TopologyKind::kPartialMesh, 9, 2);
    REQUIRE(a.links.size() == b.links.size());
    bool attrs_differ = false;
    for (std::size_t i = 0; i < a.links.size(); ++i) {
      CHECK(a.links[i].id() == b.links[i].id());
      attrs_differ |= !(a.links[i].attrs == b.links[i].attrs);
    }
    CHECK(attrs_differ);
    CHECK(generate_topology(TopologyKind::kPartialMesh, 9, 1) == a);
  }

  TEST_CASE("keyword fallback") {
    CHECK(classify_by_keywords("low latency robot control") == ServiceType::kUrllc);
    CHECK(classify_by_keywords("4K video streaming") == ServiceType::kEmbb);
    CHECK(classify_by_keywords("smart meters and sensors") == ServiceType::kMmtc);
    CHECK(classify_by_keywords("nothing relevant") == ServiceType::kUrllc);
  }

  TEST_CASE("analyze_intent with the mock backend") {
    ModelGateway g(std::make_shared<MockBackend>(MockBackend::default_rules(), 42));
    JuniorSettings s;
    const auto p = analyze_intent(intent("URLLC factory control, 4 sites"), g, s, "junior_1");
    CHECK(p.service_type == ServiceType::kUrllc);
    CHECK(p.topology.kind == TopologyKind::kFullMesh);
    CHECK(p.topology.nodes.size() == 4);
    CHECK_FALSE(p.service_config["fallback"].get<bool>());
    const auto q = analyze_intent(intent("URLLC factory control, 4 sites"), g, s, "junior_2");
    CHECK(json(p.topology) == json(q.topology));

    const auto big = analyze_intent(intent("massive sensor metering across 500 sites"), g, s, "junior_1");
    CHECK(big.topology.nodes.size() == static_cast<std::size_t>(s.max_node_count));
    CHECK(big.service_config["requested_node_count"] == 500);
    CHECK(error_code([&] { analyze_intent(intent("   "), g, s, "junior_1"); }) == errc::kIntentEmpty);
  }

  TEST_CASE("unparseable model output falls back to keywords") {
    json rules{{"rules", json::array()}, {"default_response", "I cannot help with that."}};
    ModelGateway g(std::make_shared<MockBackend>(rules, 1));
    const auto p = analyze_intent(intent("video broadband for a stadium"), g, JuniorSettings{}, "junior_1");
    CHECK(p.service_type == ServiceType::kEmbb);
    CHECK(p.service_config["fallback"].get<bool>());
    CHECK(p.topology.kind == TopologyKind::kPartialMesh);
  }

  TEST_CASE("agent endpoint") {
    JuniorAgent j("junior_1", std::make_shared<ModelGateway>(std::make_shared<MockBackend>(MockBackend::default_rules(), 42)),
                  JuniorSettings{});
    const auto req = a2a::make_request("t", "intent_ui", "junior_1", a2a::MessageKind::kIntentRequest,
                                       {{"intent", intent("sensor network")}, {"attempt", 1}});
    const auto resp = j.handle(req);
    CHECK(resp.kind == a2a::MessageKind::kProposal);
    CHECK(resp.payload["proposal"]["service_type"] == "MMTC");
  }
}

TEST_SUITE("senior_agent") {
  TEST_CASE("consensus comparison") {
    const auto a = proposal("junior_1", ServiceType::kUrllc, TopologyKind::kFullMesh, 4);
    const auto b = proposal("junior_2", ServiceType::kUrllc, TopologyKind::kFullMesh, 4, 9);
    const auto same = compare_proposals(a, b);
    CHECK(same.status == ConsensusStatus::kMatch);
    CHECK(same.divergent_fields.empty());
    const auto c = proposal("junior_2", ServiceType::kEmbb, TopologyKind::kPartialMesh, 5);
    const auto diff = compare_proposals(a, c);
    CHECK(diff.status == ConsensusStatus::kDivergence);
    CHECK(diff.divergent_fields == std::vector<std::string>{"service_type", "topology.kind", "topology.node_count"});
    auto other = c;
    other.intent_id = "intent-2";
    CHECK(error_code([&] { compare_proposals(a, other); }) == errc::kIntentMismatch);
  }

  TEST_CASE("arbitration prefers the compatible topology") {
    SeniorSettings s;
    const auto full = proposal("junior_1", ServiceType::kUrllc, TopologyKind::kFullMesh, 4);
    const auto hub = proposal("junior_2", ServiceType::kUrllc, TopologyKind::kHubAndSpoke, 4);
    const auto o = arbitrate(hub, full, s, nullptr);
    CHECK(o.chosen_index == 2);
    CHECK(o.chosen.topology.kind == TopologyKind::kFullMesh);
    CHECK_FALSE(o.asked_backend);
  }

  TEST_CASE("tied arbitration asks the backend, defaults to the first") {
    SeniorSettings s;
    const auto p1 = proposal("junior_1", ServiceType::kUrllc, TopologyKind::kFullMesh, 4, 3);
    auto p2 = p1;
    p2.agent_id = "junior_2";
    json pick2{{"rules", json::array({{{"name", "arb"}, {"when_all", {"arbiter_task"}}, {"response", {{"choice", 2}}}}})}};
    ModelGateway g2(std::make_shared<MockBackend>(pick2, 1));
    const auto asked = arbitrate(p1, p2, s, &g2, "intent");
    CHECK(asked.asked_backend);
    CHECK(asked.chosen_index == 2);
    json junk{{"rules", json::array()}, {"default_response", "no idea"}};
    ModelGateway gj(std::make_shared<MockBackend>(junk, 1));
    const auto fallback = arbitrate(p1, p2, s, &gj, "intent");
    CHECK(fallback.tie_break);
    CHECK(fallback.chosen_index == 1);
  }

  TEST_CASE("validation applies the compatibility threshold") {
    SeniorSettings s;
    CHECK(validate_proposal(proposal("j", ServiceType::kUrllc, TopologyKind::kFullMesh, 4), s, 1).passed);
    const auto r = validate_proposal(proposal("j", ServiceType::kUrllc, TopologyKind::kHubAndSpoke, 4), s, 1);
    CHECK_FALSE(r.passed);
    CHECK(r.violations.at(0).code == violation::kIncompatibleService);
  }

  TEST_CASE("retry loop counts attempts") {
    auto fail_until = [](int pass_at) {
      int calls = 0;
      auto source = [&calls](int attempt) {
        ++calls;
        return attempt;
      };
      auto check = [pass_at](int, int attempt) {
        ValidationReport r;
        r.passed = attempt >= pass_at;
        if (!r.passed) r.violations.push_back({"X", "no"});
        return r;
      };
      return std::pair{calls, validate_with_retry(source, check, 3)};
    };
    const auto [c1, ok] = fail_until(3);
    CHECK(ok.reports.size() == 3);
    CHECK(ok.reports.back().passed);
    CHECK(ok.reports[1].attempt == 2);
    try {
      fail_until(4);
      FAIL("expected VALIDATION_EXHAUSTED");
    } catch (const Error& e) {
      CHECK(e.code() == errc::kValidationExhausted);
      CHECK(e.detail()["reports"].size() == 3);
    }
    CHECK(error_code([] { validate_with_retry([](int a) { return a; }, [](int, int) { return ValidationReport{}; }, 0); }) ==
          errc::kConfigInvalid);
  }

  TEST_CASE("weights are positive and ordered by the profile") {
    SeniorSettings s;
    const auto spec = generate_topology(TopologyKind::kFullMesh, 6, 4);
    const auto wt = generate_weights(spec, ServiceType::kUrllc, s);
    CHECK(validate_weighted_topology(wt).passed);
    // URLLC weighs latency most: the lowest-latency link cannot be heavier
    // than the highest-latency link when the other attributes are equal.
    TopologySpec two = generate_topology(TopologyKind::kFullMesh, 3, 4);
    for (auto& l : two.links) l.attrs = {5.0, 1000.0, 0.2, 0.9999};
    two.links[0].attrs.latency_ms = 1.0;
    two.links[1].attrs.latency_ms = 15.0;
    const auto w2 = generate_weights(two, ServiceType::kUrllc, s);
    CHECK(w2.weights.at(two.links[0].id()) < w2.weights.at(two.links[1].id()));
    CHECK(w2.weights.at(two.links[0].id()) >= s.weight_floor);
  }

  TEST_CASE("deployment documents are deterministic") {
    SeniorSettings s;
    const auto wt = generate_weights(generate_topology(TopologyKind::kPartialMesh, 7, 2), ServiceType::kEmbb, s);
    const auto a = emit_deployment_document(wt, "task-1");
    const auto b = emit_deployment_document(wt, "task-1");
    CHECK(json(a).dump() == json(b).dump());
    CHECK(a.instructions.size() == wt.spec.nodes.size() + 2 * wt.spec.links.size());
    CHECK(a.instructions.front().action == InstructionAction::kCreateNode);
    CHECK(a.instructions.back().action == InstructionAction::kSetWeight);
  }

  TEST_CASE("endpoint counters") {
    auto g = std::make_shared<ModelGateway>(std::make_shared<MockBackend>(MockBackend::default_rules(), 42));
    SeniorAgent senior(g, SeniorSettings{});
    const auto p1 = proposal("junior_1", ServiceType::kUrllc, TopologyKind::kFullMesh, 4);
    const auto p2 = proposal("junior_2", ServiceType::kUrllc, TopologyKind::kPartialMesh, 4);
    auto req = [&](const JuniorProposal& a, const JuniorProposal& b, int attempt) {
      return a2a::make_request("t", "intent_ui", "senior", a2a::MessageKind::kValidationRequest,
                               {{"intent", intent("x")},
                                {"proposals", json::array({a, b})},
                                {"attempt", attempt},
                                {"max_attempts", 3},
                                {"previous_reports", json::array()}});
    };
    senior.handle(req(p1, p1, 1));
    CHECK(senior.arbitrations() == 0);
    const auto r = senior.handle(req(p2, p1, 1));
    CHECK(senior.arbitrations() == 1);
    CHECK(r.payload["chosen"]["topology"]["kind"] == "FULL_MESH");
    CHECK(r.payload["arbitrated"] == true);
    CHECK(senior.validations() == 2);

    senior.set_validator([](const JuniorProposal&, int) {
      ValidationReport rep;
      rep.passed = false;
      rep.violations.push_back({"X", "always"});
      return rep;
    });
    CHECK(senior.handle(req(p1, p1, 2)).payload["report"]["passed"] == false);
    CHECK(error_code([&] { senior.handle(req(p1, p1, 3)); }) == errc::kValidationExhausted);
  }
}

TEST_SUITE("emulation") {
  TEST_CASE("instantiate rebuilds the weighted topology") {
    SeniorSettings s;
    for (auto kind : {TopologyKind::kFullMesh, TopologyKind::kPartialMesh, TopologyKind::kHubAndSpoke}) {
      const auto wt = generate_weights(generate_topology(kind, 6, 8), ServiceType::kMmtc, s);
      const auto h = emulation::instantiate(emit_deployment_document(wt, "t"));
      CHECK(emulation::same_graph(h.to_weighted_topology(), wt));
      CHECK(oracle::isomorphic(h.to_weighted_topology(), wt));
      CHECK(emulation::check_reachability(h).all_pairs_connected);
    }
  }

  TEST_CASE("faults") {
    const auto wt = generate_weights(generate_topology(TopologyKind::kHubAndSpoke, 4, 8), ServiceType::kMmtc, SeniorSettings{});
    const auto doc = emit_deployment_document(wt, "t");
    emulation::FaultPlan at2;
    at2.fail_instruction = 2;
    try {
      emulation::instantiate(doc, at2);
      FAIL("expected INSTANTIATION_FAILED");
    } catch (const Error& e) {
      CHECK(e.code() == errc::kInstantiationFailed);
      CHECK(e.detail()["failed_instruction_index"] == 2);
      CHECK(e.detail()["injected"] == true);
    }
    auto broken = doc;
    broken.instructions.push_back({InstructionAction::kCreateLink, {{"endpoint_a", "n0"}, {"endpoint_b", "zz"}, {"attrs", LinkAttributes{}}}});
    CHECK(error_code([&] { emulation::instantiate(broken); }) == errc::kInstantiationFailed);

    emulation::FaultPlan cut;
    cut.links_down = {link_id("n0", "n1")};
    const auto h = emulation::instantiate(doc, cut);
    const auto reach = emulation::check_reachability(h);
    CHECK_FALSE(reach.all_pairs_connected);
    // n1 is cut off from the other three nodes, in both directions.
    CHECK(reach.unreachable_pairs.size() == 6);

    emulation::FaultPlan some;
    some.fail_instruction = 0;
    some.fail_attempts = std::set<int>{1, 2};
    CHECK_FALSE(some.for_attempt(1).empty());
    CHECK(some.for_attempt(3).empty());
    CHECK(json(some).get<emulation::FaultPlan>().fail_attempts == some.fail_attempts);
  }
}

TEST_SUITE("mcp_state") {
  TEST_CASE("jitter is bounded and reproducible") {
    ibn::Rng rng(1);
    for (int i = 0; i < 500; ++i) {
      const double load = rng.unit();
      const auto id = "l" + std::to_string(i);
      const double j = mcp::jittered_load(load, 7, id);
      CHECK(j >= 0.0);
      CHECK(j <= 1.0);
      CHECK(std::abs(j - load) <= 0.1 + 1e-12);
      CHECK(j == mcp::jittered_load(load, 7, id));
    }
  }

  TEST_CASE("store records, snapshots and replays its journal") {
    const auto journal = std::filesystem::temp_directory_path() / "ibn-tests" / "journal.jsonl";
    std::filesystem::create_directories(journal.parent_path());
    std::filesystem::remove(journal);
    const auto wt = generate_weights(generate_topology(TopologyKind::kFullMesh, 4, 8), ServiceType::kUrllc, SeniorSettings{});
    const auto doc = emit_deployment_document(wt, "task-1");
    {
      mcp::StateStore store(journal);
      CHECK(error_code([&] { store.live_state(1); }) == errc::kNoTopology);
      const auto before = store.snapshot();
      const auto ack = store.record_deployment(doc, {{"success", true}});
      CHECK(ack["acknowledged"] == true);
      CHECK(ack["topology_replaced"] == true);
      CHECK_FALSE(before->topology.has_value());  // snapshots are immutable
      const auto live = store.live_state(3);
      CHECK(live->live_attrs.size() == wt.spec.links.size());
      CHECK(store.record_deployment(doc, {{"success", false}})["topology_replaced"] == false);
    }
    mcp::StateStore again(journal);
    CHECK(again.snapshot()->deployments.size() == 2);
    CHECK(again.snapshot()->topology.has_value());
  }
}

TEST_SUITE("policy_agent") {
  TEST_CASE("policy table") {
    PolicySettings s;
    mcp::NetworkState st;
    st.topology = generate_weights(generate_topology(TopologyKind::kFullMesh, 4, 8), ServiceType::kUrllc, SeniorSettings{});
    for (const auto& l : st.topology->spec.links) st.live_attrs[l.id()] = l.attrs;
    const auto u = decide_routing(ServiceType::kUrllc, st, s);
    CHECK(u.strategy == RoutingStrategy::kDual);
    CHECK(u.coefficients.sum() == doctest::Approx(1.0));
    CHECK(decide_routing(ServiceType::kEmbb, st, s).strategy == RoutingStrategy::kDual);
    const auto m = decide_routing(ServiceType::kMmtc, st, s);
    CHECK(m.strategy == RoutingStrategy::kSpf);
    CHECK(m.metric == MetricMode::kHopCount);
  }

  TEST_CASE("heavy load shifts weight to the load term") {
    PolicySettings s;
    const auto calm = raw_coefficients(ServiceType::kUrllc, 0.5, s);
    const auto hot = raw_coefficients(ServiceType::kUrllc, 0.9, s);
    CHECK(calm.w_load == doctest::Approx(0.1));
    CHECK(hot.w_load == doctest::Approx(0.3));
    CHECK(hot.w_latency == calm.w_latency);
  }

  TEST_CASE("state must be available") {
    PolicySettings s;
    CHECK(error_code([&] { decide_routing(ServiceType::kUrllc, mcp::NetworkState{}, s); }) == errc::kStateUnavailable);
  }
}

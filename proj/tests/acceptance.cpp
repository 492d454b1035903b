// Acceptance suite: one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "ibn/emulation.hpp"
#include "ibn/fleet.hpp"
#include "ibn/metrics.hpp"
#include "ibn/raas.hpp"
#include "support.hpp"

using namespace ibn;
using nlohmann::json;
namespace role = ibn::a2a::role;

namespace {

// Tolerances and limits.
constexpr double kBleuTol = 1e-4;
constexpr double kMeteorTol = 1e-5;
constexpr double kRougeTol = 1e-12;
constexpr double kMetricSeconds = 1.0;
constexpr double kRoutingSeconds = 10.0;
constexpr double kRunSeconds = 5.0;
constexpr double kPercentTol = 1.0;
constexpr double kSumTol = 1.0;
constexpr double kUnitMs = 20.0;  // one percentage point of injected work
constexpr double kAccountingTol = 0.10;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      if (pass) detail << "first failure: " << what << "; ";
      pass = false;
    }
  }
};

std::unique_ptr<Fleet> in_process(const SystemConfig& cfg = {}) { return Fleet::start(cfg, Fleet::Mode::kInProcess); }

metrics::Tokens toks(const char* s) { return metrics::tokenize(s); }

// ---- 1 ----------------------------------------------------------------------
void metric_oracles(Outcome& o) {
  const auto t0 = Clock::now();
  const metrics::TokenPair cat{toks("the cat sat"), toks("the cat sat on the mat")};
  const metrics::TokenPair same{toks("a b c d"), toks("a b c d")};
  const double b1 = metrics::corpus_bleu(std::span(&cat, 1)).score;
  const std::vector<metrics::TokenPair> pooled{same, cat};
  const double b2 = metrics::corpus_bleu(pooled).score;
  const double m1 = metrics::meteor_sentence(toks("a b c"), toks("a b c")).score;
  const double m2 = metrics::meteor_sentence(toks("b a"), toks("a b")).score;
  const double r1 = metrics::rouge_l(toks("a b c"), toks("a x b y c")).f_measure;
  const double elapsed = seconds_since(t0);
  o.require(std::abs(b1 - 0.36788) <= kBleuTol, "BLEU-2 hand example");
  o.require(std::abs(b2 - 0.65144) <= kBleuTol, "BLEU-2 pooled corpus");
  o.require(std::abs(m1 - (1.0 - 1.0 / 54.0)) <= kMeteorTol && std::abs(m1 - 0.98148) <= kMeteorTol,
            "METEOR identity");
  o.require(m2 == 0.5, "METEOR reversed pair");
  o.require(std::abs(r1 - 0.75) <= kRougeTol, "ROUGE-L example");
  o.require(elapsed < kMetricSeconds, "runtime");
  o.detail << "bleu=" << b1 << " pooled=" << b2 << " meteor=" << m1 << "/" << m2 << " rougeL=" << r1
           << " in " << elapsed << " s";
}

// ---- 2 ----------------------------------------------------------------------
void routing_equivalence(Outcome& o) {
  const auto t0 = Clock::now();
  const raas::CostModel cost{{1.0, 0.0, 0.0}, MetricMode::kComposite, 0.0, {}};
  Rng rng(20240601);
  std::size_t checked = 0;
  std::size_t fs_listed = 0;
  std::size_t violations = 0;
  for (int g = 0; g < 100; ++g) {
    const auto m = oracle::random_connected(rng, 2 + rng.below(6), 0.35);
    const auto graph = raas::Graph::from_topology(oracle::to_spec(m));
    for (std::size_t s = 0; s < m.size(); ++s) {
      const auto tree = raas::spf(graph, m.ids[s], cost);
      const auto table = raas::dual_routes(graph, m.ids[s], cost);
      for (std::size_t t = 0; t < m.size(); ++t) {
        const double want = oracle::simple_path_min(m, s, t);
        ++checked;
        o.require(tree.distance_to(m.ids[t]) == want, "SPF distance vs enumeration");
        if (s == t) continue;
        const auto* r = table.find(m.ids[t]);
        o.require(r != nullptr && r->feasible_distance == want, "DUAL FD vs SPF");
        if (r == nullptr) continue;
        for (const auto& fs : r->feasible_successors) {
          ++fs_listed;
          const double rd = oracle::simple_path_min(m, m.at(fs.node), t);
          if (!(rd < r->feasible_distance) || rd != fs.reported_distance) ++violations;
        }
      }
    }
  }
  const double elapsed = seconds_since(t0);
  o.require(violations == 0, "feasibility condition");
  o.require(elapsed < kRoutingSeconds, "runtime");
  o.detail << checked << " distances, " << fs_listed << " feasible successors, " << violations << " violations in "
           << elapsed << " s";
}

// ---- 3 ----------------------------------------------------------------------
void pseudo_node_law(Outcome& o) {
  const raas::CostModel cost{{1.0, 0.0, 0.0}, MetricMode::kComposite, 0.0, {}};
  Rng rng(77);
  std::size_t pairs = 0;
  for (int inst = 0; inst < 20; ++inst) {
    oracle::Matrix dm[2];
    std::vector<std::size_t> borders[2];
    std::vector<raas::DomainGraph> domains;
    for (int d = 0; d < 2; ++d) {
      dm[d] = oracle::random_connected(rng, 3 + rng.below(3), 0.3);
      // One or two borders per domain.
      borders[d].push_back(rng.below(dm[d].size()));
      if (rng.unit() < 0.5) {
        const auto b = rng.below(dm[d].size());
        if (b != borders[d][0]) borders[d].push_back(b);
      }
      raas::DomainGraph g;
      g.domain_id = d == 0 ? "A" : "B";
      for (std::size_t i = 0; i < dm[d].size(); ++i) {
        const bool border = std::find(borders[d].begin(), borders[d].end(), i) != borders[d].end();
        g.nodes.push_back({dm[d].ids[i], NodeRole::kRouter, border});
      }
      g.links = oracle::to_spec(dm[d]).links;
      domains.push_back(g);
    }
    const auto global = raas::aggregate_domains(domains);
    for (std::size_t s = 0; s < dm[0].size(); ++s) {
      const auto src = raas::global_id("A", dm[0].ids[s]);
      const auto tree = raas::spf(global.graph, src, cost);
      for (std::size_t t = 0; t < dm[1].size(); ++t) {
        const auto dst = raas::global_id("B", dm[1].ids[t]);
        double want = oracle::kInf;
        for (auto b1 : borders[0]) {
          for (auto b2 : borders[1]) {
            want = std::min(want, oracle::simple_path_min(dm[0], s, b1) + oracle::simple_path_min(dm[1], b2, t));
          }
        }
        ++pairs;
        o.require(tree.distance_to(dst) == want, "cross-domain cost vs border legs");
        const auto spliced = raas::splice_pseudo_node(tree.path_to(dst), global);
        o.require(std::find(spliced.begin(), spliced.end(), global.pseudo_node_id) == spliced.end(),
                  "pseudo node in spliced path");
        o.require(!spliced.empty() && spliced.front() == src && spliced.back() == dst, "spliced endpoints");
        // Entries exist for the spliced path, so it is deployable hop by hop.
        o.require(raas::replay_entries(src, dst, raas::paths_to_flow_entries(spliced, global.graph),
                                       raas::paths_to_route_maps(spliced, global.graph), global.graph) == spliced,
                  "spliced path replays");
      }
    }
  }
  o.detail << "20 instances, " << pairs << " cross-domain pairs";
}

// ---- 4 ----------------------------------------------------------------------
void dmr_behaviour(Outcome& o) {
  auto fleet = in_process();
  const auto rec = fleet->orchestrator().run_pipeline("URLLC factory control, 4 sites");
  o.require(rec.status == PipelineStatus::kCompleted, "identical run completes");
  o.require(rec.phase_results["consensus"]["status"] == "MATCH", "identical proposals MATCH");
  o.require(fleet->senior().arbitrations() == 0, "no arbitration on MATCH");
  o.detail << "match arbitrations=" << fleet->senior().arbitrations();

  // junior_2 answers with a different topology kind for the same intent.
  const auto& base = MockBackend::default_rules();
  for (int diverging = 1; diverging <= 2; ++diverging) {
    const auto odd = fixture::rules_with("junior-urllc", "topology_kind", "PARTIAL_MESH");
    auto a = diverging == 1 ? fixture::assemble(odd, base) : fixture::assemble(base, odd);
    const auto r = a.orchestrator->run_pipeline("URLLC factory control, 4 sites");
    const auto& c = r.phase_results["consensus"];
    o.require(r.status == PipelineStatus::kCompleted, "divergent run completes");
    o.require(c["status"] == "DIVERGENCE", "divergence detected");
    o.require(a.senior->arbitrations() == 1, "exactly one arbitration");
    o.require(c["chosen"]["topology"]["kind"] == "FULL_MESH", "compatibility winner chosen");
    o.require(c["chosen"]["agent_id"] == (diverging == 1 ? role::kJunior2 : role::kJunior1), "winner identity");
    o.detail << "; divergent junior_" << diverging << " arbitrations=" << a.senior->arbitrations()
             << " chosen=" << c["chosen"]["topology"]["kind"].get<std::string>();
  }
}

// ---- 5 ----------------------------------------------------------------------
void retry_budget(Outcome& o) {
  auto failing = [](int pass_at) {
    return [pass_at](const JuniorProposal&, int attempt) {
      ValidationReport r;
      r.attempt = attempt;
      r.passed = attempt >= pass_at;
      if (!r.passed) r.violations.push_back({"INJECTED", "validator set to fail"});
      return r;
    };
  };
  const std::string intent = "URLLC factory control, 4 sites";
  {
    auto fleet = in_process();
    fleet->senior().set_validator(failing(99));
    const auto r = fleet->orchestrator().run_pipeline(intent);
    const auto& reps = r.phase_results["validation_reports_phase1"];
    o.require(r.status == PipelineStatus::kFailed && r.failure_code == errc::kValidationExhausted,
              "phase 1 always-fail -> VALIDATION_EXHAUSTED");
    o.require(reps.size() == 3, "phase 1 always-fail report count");
    o.require(fleet->senior().validations() == 3, "phase 1 validator invocations");
    o.detail << "p1 fail: " << reps.size() << " reports " << r.failure_code;
  }
  {
    auto fleet = in_process();
    fleet->senior().set_validator(failing(3));
    const auto r = fleet->orchestrator().run_pipeline(intent);
    const auto& reps = r.phase_results["validation_reports_phase1"];
    o.require(r.status == PipelineStatus::kCompleted, "phase 1 fail-twice completes");
    o.require(reps.size() == 3 && reps.back()["passed"] == true, "phase 1 fail-twice reports");
    o.detail << "; p1 2-then-pass: " << reps.size() << " reports";
  }
  {
    auto fleet = in_process();
    emulation::FaultPlan always;
    always.fail_instruction = 0;
    fleet->orchestrator().set_fault_plan(always);
    const auto r = fleet->orchestrator().run_pipeline(intent);
    const auto& reps = r.phase_results["validation_reports_phase2"];
    o.require(r.status == PipelineStatus::kFailed && r.failure_code == errc::kValidationExhausted,
              "phase 2 always-fail -> VALIDATION_EXHAUSTED");
    o.require(reps.size() == 3, "phase 2 always-fail report count");
    o.detail << "; p2 fail: " << reps.size() << " reports " << r.failure_code;
  }
  {
    auto fleet = in_process();
    emulation::FaultPlan twice;
    twice.fail_instruction = 0;
    twice.fail_attempts = std::set<int>{1, 2};
    fleet->orchestrator().set_fault_plan(twice);
    const auto r = fleet->orchestrator().run_pipeline(intent);
    const auto& reps = r.phase_results["validation_reports_phase2"];
    o.require(r.status == PipelineStatus::kCompleted, "phase 2 fail-twice completes");
    o.require(reps.size() == 3 && reps.back()["passed"] == true, "phase 2 fail-twice reports");
    o.detail << "; p2 2-then-pass: " << reps.size() << " reports";
  }
}

// ---- 6 ----------------------------------------------------------------------
void determinism(Outcome& o) {
  std::string dumps[2];
  double worst = 0;
  std::set<std::string> roles;
  for (int i = 0; i < 2; ++i) {
    auto fleet = in_process();
    const auto t0 = Clock::now();
    const auto rec = fleet->orchestrator().run_pipeline("URLLC factory control, 4 sites");
    worst = std::max(worst, seconds_since(t0));
    o.require(rec.status == PipelineStatus::kCompleted, "URLLC run completes");
    o.require(rec.phase_results["routing_decision"]["strategy"] == "DUAL", "URLLC selects DUAL");
    dumps[i] = strip_volatile(json(rec)).dump();
    for (const auto& e : fleet->log().all()) roles.insert(e.from_agent);
  }
  o.require(dumps[0] == dumps[1], "byte-identical records");
  {
    auto fleet = in_process();
    const auto t0 = Clock::now();
    const auto rec = fleet->orchestrator().run_pipeline("massive sensor metering network");
    worst = std::max(worst, seconds_since(t0));
    o.require(rec.phase_results["routing_decision"]["strategy"] == "SPF", "mMTC selects SPF");
  }
  for (const char* r : {role::kIntentUi, role::kJunior1, role::kJunior2, role::kSenior, role::kPolicy}) {
    o.require(roles.count(r) == 1, std::string("log has ") + r);
  }
  o.require(worst < kRunSeconds, "runtime");
  o.detail << "record " << dumps[0].size() << " bytes identical=" << (dumps[0] == dumps[1]) << ", " << roles.size()
           << " roles in log, slowest run " << worst << " s";
}

// ---- 7 ----------------------------------------------------------------------
// Handler delays in ratio 13:7:51:29. The juniors share 7 units (3.5 each,
// run in parallel), the senior's 51 units are spread over its three calls,
// and the intent UI's 13 units are its own coordination delay.
std::vector<IterationShare> profile(double unit_ms, int iterations) {
  auto cfg = config_from_json(json{{"coordination_delay_ms", 13 * unit_ms}});
  auto fleet = in_process(cfg);
  fleet->set_handler_delay(role::kJunior1, 3.5 * unit_ms);
  fleet->set_handler_delay(role::kJunior2, 3.5 * unit_ms);
  fleet->set_handler_delay(role::kSenior, 17 * unit_ms);
  fleet->set_handler_delay(role::kPolicy, 29 * unit_ms);
  for (int i = 0; i < iterations; ++i) fleet->orchestrator().run_pipeline("URLLC factory control, 4 sites");
  return time_distribution(fleet->orchestrator().records(), iterations);
}

void profiler(Outcome& o) {
  const std::map<std::string, double> want{{"intent_ui", 13}, {"junior_both", 7}, {"senior", 51}, {"policy", 29}};
  const auto shares = profile(kUnitMs, 3);
  for (const auto& s : shares) {
    double sum = 0;
    o.detail << "iter" << s.iteration << " {";
    for (const auto& [r, p] : s.percentages) {
      sum += p;
      o.require(std::abs(p - want.at(r)) <= kPercentTol, "iteration " + std::to_string(s.iteration) + " " + r);
      o.detail << r << "=" << p << " ";
    }
    o.detail << "sum=" << sum << "} ";
    o.require(std::abs(sum - 100.0) <= kSumTol, "percentages sum");
  }
}

// ---- 8 ----------------------------------------------------------------------
void round_trip(Outcome& o) {
  const TopologyKind kinds[] = {TopologyKind::kFullMesh, TopologyKind::kPartialMesh, TopologyKind::kHubAndSpoke};
  const ServiceType services[] = {ServiceType::kUrllc, ServiceType::kEmbb, ServiceType::kMmtc};
  SeniorSettings settings;
  int ok = 0;
  for (int i = 0; i < 50; ++i) {
    const auto kind = kinds[i % 3];
    const int n = 4 + i % 4;
    const auto wt = generate_weights(generate_topology(kind, n, 1000 + i), services[i / 3 % 3], settings);
    const auto doc = emit_deployment_document(wt, "task-" + std::to_string(i));
    const auto built = emulation::instantiate(json(doc).get<DeploymentDocument>()).to_weighted_topology();
    const bool iso = oracle::isomorphic(built, wt);
    o.require(iso, "topology " + std::to_string(i) + " not isomorphic");
    ok += iso;
  }
  o.detail << ok << "/50 isomorphic (n=4..7, all kinds)";
}

// ---- 9 ----------------------------------------------------------------------
void generators(Outcome& o) {
  std::size_t checked = 0;
  for (int n = 3; n <= 8; ++n) {
    const auto full = generate_topology(TopologyKind::kFullMesh, n, n);
    o.require(full.links.size() == static_cast<std::size_t>(n * (n - 1) / 2), "full mesh links");
    const auto hub = generate_topology(TopologyKind::kHubAndSpoke, n, n);
    o.require(hub.links.size() == static_cast<std::size_t>(n - 1), "hub links");
    std::map<std::string, std::size_t> deg;
    for (const auto& l : hub.links) {
      ++deg[l.endpoint_a];
      ++deg[l.endpoint_b];
    }
    std::size_t max_deg = 0;
    for (const auto& [id, d] : deg) max_deg = std::max(max_deg, d);
    o.require(max_deg == static_cast<std::size_t>(n - 1), "hub degree");
    checked += 2;
  }
  for (int n = 4; n <= 32; ++n) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto part = generate_topology(TopologyKind::kPartialMesh, n, seed);
      o.require(oracle::spec_connected(part), "partial mesh connected");
      o.require(part.links.size() > static_cast<std::size_t>(n - 1) &&
                    part.links.size() < static_cast<std::size_t>(n * (n - 1) / 2),
                "partial mesh link count");
      ++checked;
    }
  }
  o.detail << checked << " generated topologies";
}

// ---- 10 ---------------------------------------------------------------------
// The speedup between two served models cannot be measured here. What can be
// checked is that backend latency lands in the right rows: two fleets whose
// only difference is per-call model latency must differ, per role, by
// exactly calls x latency difference.
void latency_accounting(Outcome& o) {
  constexpr double kSmall = 30.0;
  constexpr double kLarge = 60.0;
  constexpr int kRuns = 3;
  std::map<std::string, double> per_role[2];
  double totals[2] = {0, 0};
  for (int f = 0; f < 2; ++f) {
    auto cfg = config_from_json(json{{"mock_rules", fixture::rules_delayed(f == 0 ? kSmall : kLarge)}});
    auto fleet = in_process(cfg);
    for (int i = 0; i < kRuns; ++i) {
      const auto rec = fleet->orchestrator().run_pipeline("URLLC factory control, 4 sites");
      totals[f] += rec.total_ms;
      for (const auto& t : rec.timings) per_role[f][t.agent_role] += t.elapsed_ms;
    }
  }
  // Per run: one model call in each junior and one in the policy agent.
  const double delta = kRuns * (kLarge - kSmall);
  for (const char* r : {role::kJunior1, role::kJunior2, role::kPolicy}) {
    const double got = per_role[1][r] - per_role[0][r];
    o.require(std::abs(got - delta) <= kAccountingTol * delta, std::string("accounted latency for ") + r);
  }
  const double wall = totals[1] - totals[0];
  // Juniors overlap, so the wall clock grows by two calls per run, not three.
  o.require(std::abs(wall - 2 * delta) <= kAccountingTol * 2 * delta, "end-to-end difference");
  o.detail << "substitute check; small=" << totals[0] / kRuns << " ms large=" << totals[1] / kRuns
           << " ms per run, speedup " << 100.0 * (1.0 - totals[0] / totals[1])
           << "% (served-model claim not reproducible offline)";
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    std::function<void(Outcome&)> run;
  };
  const std::vector<Criterion> criteria{
      {1, "metric oracle suite", metric_oracles},
      {2, "routing equivalence", routing_equivalence},
      {3, "pseudo-node law", pseudo_node_law},
      {4, "DMR behaviour", dmr_behaviour},
      {5, "retry budget", retry_budget},
      {6, "end-to-end determinism", determinism},
      {7, "profiler arithmetic", profiler},
      {8, "deployment round trip", round_trip},
      {9, "topology generators", generators},
      {10, "latency accounting", latency_accounting},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    Outcome o;
    try {
      c.run(o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << "exception: " << e.what();
    }
    failed += !o.pass;
    std::printf("%s criterion %d: %s -- %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.str().c_str());
    std::fflush(stdout);
  }
  return failed;
}

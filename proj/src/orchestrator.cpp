#include "ibn/orchestrator.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <set>
#include <thread>

#include "ibn/error.hpp"
#include "ibn/raas.hpp"

namespace ibn {

using a2a::MessageKind;
namespace role = a2a::role;

// ---- phase results ---------------------------------------------------------

void PhaseResults::ingest(const a2a::Envelope& e) {
  const auto& p = e.payload;
  switch (e.kind) {
    case MessageKind::kProposal:
      if (e.from_agent == role::kJunior1) value_["proposals"][0] = p.at("proposal");
      if (e.from_agent == role::kJunior2) value_["proposals"][1] = p.at("proposal");
      break;
    case MessageKind::kValidationRequest:
      // A new phase-1 round (full restart) replaces the earlier reports.
      if (p.value("attempt", 1) == 1) {
        value_["validation_reports_phase1"] = json::array();
        value_["consensus"] = nullptr;
      }
      break;
    case MessageKind::kValidationResult: {
      auto consensus = p.at("consensus");
      consensus["arbitrated"] = p.value("arbitrated", false);
      consensus["arbitration"] = p.value("arbitration", json(nullptr));
      value_["consensus"] = consensus;
      value_["validation_reports_phase1"].push_back(p.at("report"));
      break;
    }
    case MessageKind::kError:
      if (p.value("code", std::string{}) == errc::kValidationExhausted && e.from_agent == role::kSenior) {
        value_["validation_reports_phase1"] = p.at("detail").value("reports", json::array());
      }
      break;
    case MessageKind::kDeploymentResult: {
      const auto stage = p.value("stage", std::string{});
      if (stage == "initial" || stage == "phase2") value_["deployment_result"] = p.at("result");
      if (stage == "phase2") value_["validation_reports_phase2"].push_back(p.at("report"));
      if (stage == "routes") value_["route_artifacts"] = p.at("route_artifacts");
      break;
    }
    case MessageKind::kRoutingDecision:
      value_["routing_decision"] = p.at("decision");
      break;
    default:
      break;
  }
}

bool PhaseResults::complete() const {
  for (const auto& [key, v] : value_.items()) {
    if (v.is_null()) return false;
  }
  return !value_["proposals"][0].is_null() && !value_["proposals"][1].is_null() &&
         !value_["validation_reports_phase1"].empty() && !value_["validation_reports_phase2"].empty();
}

json replay_phase_results(const std::vector<a2a::Envelope>& log, const std::string& task_id) {
  PhaseResults r;
  for (const auto& e : log) {
    if (e.task_id == task_id) r.ingest(e);
  }
  return r.value();
}

// ---- records ---------------------------------------------------------------

std::string to_string(PipelineStatus s) {
  switch (s) {
    case PipelineStatus::kRunning: return "RUNNING";
    case PipelineStatus::kCompleted: return "COMPLETED";
    case PipelineStatus::kFailed: return "FAILED";
  }
  return "RUNNING";
}

void to_json(json& j, const Timing& v) {
  j = json{{"agent_role", v.agent_role},
           {"phase", v.phase},
           {"attempt", v.attempt},
           {"started_ms", v.started_ms},
           {"finished_ms", v.finished_ms},
           {"elapsed_ms", v.elapsed_ms}};
}

void from_json(const json& j, Timing& v) {
  v.agent_role = j.at("agent_role").get<std::string>();
  v.phase = j.value("phase", std::string{});
  v.attempt = j.value("attempt", 0);
  v.started_ms = j.value("started_ms", 0.0);
  v.finished_ms = j.value("finished_ms", 0.0);
  v.elapsed_ms = j.at("elapsed_ms").get<double>();
}

void to_json(json& j, const PipelineRecord& v) {
  j = json{{"task_id", v.task_id},
           {"intent", v.intent},
           {"phase_results", v.phase_results},
           {"status", to_string(v.status)},
           {"timings", v.timings},
           {"total_ms", v.total_ms}};
  if (v.status == PipelineStatus::kFailed) {
    j["failure"] = {{"code", v.failure_code}, {"message", v.failure_message}};
  }
}

void from_json(const json& j, PipelineRecord& v) {
  v.task_id = j.at("task_id").get<std::string>();
  v.intent = j.at("intent").get<Intent>();
  v.phase_results = j.at("phase_results");
  const auto status = j.at("status").get<std::string>();
  v.status = status == "COMPLETED" ? PipelineStatus::kCompleted
             : status == "FAILED"  ? PipelineStatus::kFailed
                                   : PipelineStatus::kRunning;
  if (j.contains("failure")) {
    v.failure_code = j["failure"].value("code", std::string{});
    v.failure_message = j["failure"].value("message", std::string{});
  }
  v.timings = j.value("timings", std::vector<Timing>{});
  v.total_ms = j.value("total_ms", 0.0);
}

json strip_volatile(const json& record) {
  static const std::set<std::string> drop{"timestamp",   "submitted_at", "emitted_at", "updated_at",
                                          "recorded_at", "started_ms",   "finished_ms", "elapsed_ms",
                                          "total_ms",    "timings"};
  if (record.is_object()) {
    json out = json::object();
    for (const auto& [k, v] : record.items()) {
      if (drop.count(k) == 0) out[k] = strip_volatile(v);
    }
    return out;
  }
  if (record.is_array()) {
    json out = json::array();
    for (const auto& v : record) out.push_back(strip_volatile(v));
    return out;
  }
  return record;
}

// ---- timing report ---------------------------------------------------------

std::vector<IterationShare> time_distribution(const std::vector<PipelineRecord>& records, int iterations) {
  if (iterations < 1) throw Error(errc::kBadRequest, "iterations must be at least 1");
  if (records.size() < static_cast<std::size_t>(iterations)) {
    throw Error(errc::kNoRecords, "need at least one record per iteration",
                {{"records", records.size()}, {"iterations", iterations}});
  }
  const auto n = records.size();
  const auto k = static_cast<std::size_t>(iterations);
  std::vector<IterationShare> out;
  for (std::size_t it = 0; it < k; ++it) {
    IterationShare share;
    share.iteration = static_cast<int>(it) + 1;
    std::map<std::string, double> sums{{"intent_ui", 0.0}, {"junior_both", 0.0}, {"senior", 0.0}, {"policy", 0.0}};
    for (std::size_t r = it * n / k; r < (it + 1) * n / k; ++r) {
      ++share.runs;
      for (const auto& t : records[r].timings) {
        if (t.agent_role == role::kJunior1 || t.agent_role == role::kJunior2) {
          sums["junior_both"] += t.elapsed_ms;
        } else if (sums.count(t.agent_role) != 0) {
          sums[t.agent_role] += t.elapsed_ms;
        }
      }
    }
    for (const auto& [r, ms] : sums) share.total_ms += ms;
    for (const auto& [r, ms] : sums) {
      share.percentages[r] = share.total_ms > 0 ? std::round(1000.0 * ms / share.total_ms) / 10.0 : 0.0;
    }
    out.push_back(std::move(share));
  }
  return out;
}

void to_json(json& j, const IterationShare& v) {
  j = json{{"iteration", v.iteration}, {"runs", v.runs}, {"total_ms", v.total_ms}, {"percentages", v.percentages}};
}

// ---- orchestrator ----------------------------------------------------------

namespace {

using Clock = std::chrono::steady_clock;

double ms_between(Clock::time_point a, Clock::time_point b) {
  return std::chrono::duration<double, std::milli>(b - a).count();
}

struct Failure {
  std::string code;
  std::string message;
};

void expect_ok(const a2a::Delivery& d) {
  if (d.response.kind == MessageKind::kError) {
    throw Failure{d.response.payload.value("code", std::string("UNKNOWN")),
                  d.response.from_agent + ": " + d.response.payload.value("message", std::string{})};
  }
}

bool blank(const std::string& s) {
  return std::all_of(s.begin(), s.end(), [](char c) { return std::isspace(static_cast<unsigned char>(c)); });
}

}  // namespace

struct Orchestrator::Run {
  PipelineRecord record;
  PhaseResults phases;
  Clock::time_point t0 = Clock::now();
  double agent_ms = 0.0;  // handler time attributed to juniors (max per fan-out), senior and policy
};

Orchestrator::Orchestrator(std::shared_ptr<a2a::Client> client, std::shared_ptr<mcp::McpClient> state,
                           OrchestratorSettings settings)
    : client_(std::move(client)), state_(std::move(state)), settings_(settings) {
  if (settings_.phase1_max_attempts < 1 || settings_.phase2_max_attempts < 1) {
    throw Error(errc::kConfigInvalid, "retry budgets must be at least 1");
  }
}

Orchestrator::~Orchestrator() { wait_all(); }

void Orchestrator::set_fault_plan(emulation::FaultPlan plan) {
  set_fault_source([plan](int attempt) { return plan.for_attempt(attempt); });
}

void Orchestrator::set_fault_source(FaultSource source) {
  std::lock_guard lock(faults_mu_);
  faults_ = std::move(source);
}

emulation::FaultPlan Orchestrator::fault_plan(int attempt) const {
  std::lock_guard lock(faults_mu_);
  return faults_ ? faults_(attempt) : emulation::FaultPlan{};
}

std::unique_ptr<Orchestrator::Run> Orchestrator::start_run(const std::string& intent_text, const std::string& source) {
  if (blank(intent_text)) throw Error(errc::kIntentEmpty, "intent text is empty");
  char id[32];
  std::snprintf(id, sizeof id, "%06llu", static_cast<unsigned long long>(++counter_));
  auto run = std::make_unique<Run>();
  run->record.task_id = std::string("task-") + id;
  run->record.intent = {std::string("intent-") + id, intent_text, utc_now_iso(), source};
  run->record.phase_results = run->phases.value();
  {
    std::lock_guard lock(mu_);
    order_.push_back(run->record.task_id);
    records_[run->record.task_id] = run->record;
  }
  return run;
}

void Orchestrator::publish(const Run& run) {
  std::lock_guard lock(mu_);
  auto& r = records_[run.record.task_id];
  r = run.record;
  r.phase_results = run.phases.value();
}

a2a::Delivery Orchestrator::call(Run& run, const std::string& to, MessageKind kind, json payload,
                                 const std::string& phase, int attempt, bool agent_time) {
  const auto req = a2a::make_request(run.record.task_id, role::kIntentUi, to, kind, std::move(payload));
  const auto start = Clock::now();
  auto d = client_->exchange(req);
  const auto end = Clock::now();
  run.phases.ingest(req);
  run.phases.ingest(d.response);
  run.record.timings.push_back({to, phase, attempt, ms_between(run.t0, start), ms_between(run.t0, end), d.handler_ms});
  if (agent_time) run.agent_ms += d.handler_ms;
  return d;
}

JuniorProposal Orchestrator::phase1(Run& run, int round) {
  const int max = settings_.phase1_max_attempts;
  json previous = json::array();
  for (int attempt = 1; attempt <= max; ++attempt) {
    // Later rounds (full restart) draw fresh seeds.
    const json request{{"intent", run.record.intent}, {"attempt", attempt + round * max}};
    const auto r1 = a2a::make_request(run.record.task_id, role::kIntentUi, role::kJunior1,
                                      MessageKind::kIntentRequest, request);
    const auto r2 = a2a::make_request(run.record.task_id, role::kIntentUi, role::kJunior2,
                                      MessageKind::kIntentRequest, request);
    struct Timed {
      a2a::Delivery d;
      Clock::time_point start, end;
    };
    auto send = [this](const a2a::Envelope& r) {
      Timed t;
      t.start = Clock::now();
      t.d = client_->exchange(r);
      t.end = Clock::now();
      return t;
    };
    auto f1 = std::async(std::launch::async, send, std::cref(r1));
    auto f2 = std::async(std::launch::async, send, std::cref(r2));
    // Join both before looking at either result.
    f1.wait();
    f2.wait();
    const auto t1 = f1.get();
    const auto t2 = f2.get();
    for (const auto* t : {&t1, &t2}) {
      run.phases.ingest(t == &t1 ? r1 : r2);
      run.phases.ingest(t->d.response);
      run.record.timings.push_back({t->d.response.from_agent, "phase1", attempt, ms_between(run.t0, t->start),
                                   ms_between(run.t0, t->end), t->d.handler_ms});
    }
    run.agent_ms += std::max(t1.d.handler_ms, t2.d.handler_ms);
    publish(run);
    expect_ok(t1.d);
    expect_ok(t2.d);

    const auto p1 = t1.d.response.payload.at("proposal").get<JuniorProposal>();
    const auto p2 = t2.d.response.payload.at("proposal").get<JuniorProposal>();
    const auto d = call(run, role::kSenior, MessageKind::kValidationRequest,
                        json{{"intent", run.record.intent},
                             {"proposals", json::array({p1, p2})},
                             {"attempt", attempt},
                             {"max_attempts", max},
                             {"previous_reports", previous}},
                        "phase1", attempt);
    publish(run);
    expect_ok(d);
    const auto& body = d.response.payload;
    previous.push_back(body.at("report"));
    if (body["report"].value("passed", false)) return body.at("chosen").get<JuniorProposal>();
  }
  throw Failure{errc::kValidationExhausted, "phase-1 validation failed on all attempts"};
}

void Orchestrator::execute(Run& run) {
  const auto& task_id = run.record.task_id;
  if (settings_.coordination_delay_ms > 0) {
    std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(settings_.coordination_delay_ms));
  }

  auto chosen = phase1(run, 0);

  auto weights = [&](const JuniorProposal& p, const json& live, const std::string& phase, int attempt) {
    json payload{{"task_id", task_id}, {"service_type", p.service_type}, {"spec", p.topology}};
    if (!live.is_null()) payload["live_attrs"] = live;
    const auto d = call(run, role::kSenior, MessageKind::kWeights, payload, phase, attempt);
    expect_ok(d);
    return d.response.payload.at("deployment_document").get<DeploymentDocument>();
  };
  auto record = [&](const DeploymentDocument& doc, const json& result, const std::string& stage, int attempt,
                    json extra = json::object()) {
    json payload{{"stage", stage}, {"attempt", attempt}, {"document", doc}, {"result", result}};
    payload.update(extra);
    const auto d = call(run, role::kMcpState, MessageKind::kDeploymentResult, payload, stage, attempt, false);
    publish(run);
    expect_ok(d);
  };

  // Initial deployment. Injected faults only feed the phase-2 loop;
  // a structural failure ends the run.
  {
    const auto doc = weights(chosen, nullptr, "deploy", 0);
    json result{{"stage", "initial"}, {"attempt", 0}, {"instruction_count", doc.instructions.size()}};
    try {
      const auto handle = emulation::instantiate(doc, fault_plan(0));
      result["success"] = true;
      result["nodes"] = handle.nodes().size();
      result["links"] = handle.links().size();
    } catch (const Error& e) {
      if (e.code() != errc::kInstantiationFailed) throw;
      result["success"] = false;
      result["failure"] = e.detail();
      if (!e.detail().value("injected", false)) {
        record(doc, result, "initial", 0);
        throw Failure{errc::kInstantiationFailed, e.what()};
      }
    }
    record(doc, result, "initial", 0);
  }

  // Second validation loop over the instantiated network.
  DeploymentDocument final_doc;
  for (int k = 1;; ++k) {
    const auto seed = settings_.seed + static_cast<std::uint64_t>(k);
    std::map<std::string, LinkAttributes> live;
    std::string live_source = "simulated";
    try {
      const auto s = state_->live_state(seed);
      const mcp::DeploymentRecord* latest = nullptr;
      for (const auto& rec : s->deployments) {
        if (rec.result.value("success", false)) latest = &rec;
      }
      if (latest != nullptr && latest->task_id == task_id && s->topology && s->topology->spec == chosen.topology) {
        live = s->live_attrs;
        live_source = "mcp_state";
      }
    } catch (const Error&) {
      // No deployed topology yet; fall back to the same jitter over the spec.
    }
    if (live_source != "mcp_state") live = mcp::jitter_live_attrs(chosen.topology, seed);

    const auto doc = weights(chosen, json(live), "phase2", k);
    ValidationReport report;
    report.attempt = k;
    report.timestamp = utc_now_iso();
    json result{{"stage", "phase2"}, {"attempt", k}, {"live_source", live_source},
                {"instruction_count", doc.instructions.size()}};
    bool terminal = false;
    try {
      const auto handle = emulation::instantiate(doc, fault_plan(k));
      const auto reach = emulation::check_reachability(handle);
      result["reachability"] = reach;
      result["costs"] = raas::analyse_costs(doc.topology, reach.links_down);
      if (!reach.all_pairs_connected) {
        report.violations.push_back({violation::kUnreachablePairs,
                                     std::to_string(reach.unreachable_pairs.size()) + " node pairs unreachable"});
      }
    } catch (const Error& e) {
      if (e.code() != errc::kInstantiationFailed) throw;
      result["failure"] = e.detail();
      const bool injected = e.detail().value("injected", false);
      report.violations.push_back({injected ? violation::kInjectedFault : violation::kInstantiationFailed, e.what()});
      terminal = !injected;
    }
    report.passed = report.violations.empty();
    result["success"] = report.passed;
    record(doc, result, "phase2", k, json{{"report", report}});
    if (terminal) throw Failure{errc::kInstantiationFailed, report.violations.back().message};
    if (report.passed) {
      final_doc = doc;
      break;
    }
    if (k >= settings_.phase2_max_attempts) {
      throw Failure{errc::kValidationExhausted,
                    "phase-2 validation failed on all " + std::to_string(settings_.phase2_max_attempts) + " attempts"};
    }
    if (settings_.phase2_full_restart) chosen = phase1(run, k);
  }

  // Policy decision over the live state of the deployed network.
  const auto live_seed = settings_.seed + 100;
  const auto pd = call(run, role::kPolicy, MessageKind::kPolicyRequest,
                       json{{"service_type", chosen.service_type}, {"live_seed", live_seed}}, "policy", 1);
  publish(run);
  expect_ok(pd);
  const auto decision = pd.response.payload.at("decision").get<RoutingDecision>();

  // Routes for every endpoint pair, recorded with the deployment.
  const auto routes = raas::compute_routes(final_doc.topology.spec, decision,
                                           mcp::jitter_live_attrs(final_doc.topology.spec, live_seed),
                                           settings_.pseudo_edge_cost);
  record(final_doc, json{{"stage", "routes"}, {"success", true}}, "routes", 1,
         json{{"routing_decision", decision}, {"route_artifacts", routes}});
}

void Orchestrator::finish(Run& run) {
  try {
    execute(run);
    if (run.phases.complete()) {
      run.record.status = PipelineStatus::kCompleted;
    } else {
      run.record.status = PipelineStatus::kFailed;
      run.record.failure_code = "INCOMPLETE";
      run.record.failure_message = "pipeline finished without every phase result";
    }
  } catch (const Failure& f) {
    run.record.status = PipelineStatus::kFailed;
    run.record.failure_code = f.code;
    run.record.failure_message = f.message;
  } catch (const Error& e) {
    run.record.status = PipelineStatus::kFailed;
    run.record.failure_code = e.code();
    run.record.failure_message = e.what();
  } catch (const std::exception& e) {
    run.record.status = PipelineStatus::kFailed;
    run.record.failure_code = "INTERNAL";
    run.record.failure_message = e.what();
  }
  run.record.total_ms = ms_between(run.t0, Clock::now());
  // Everything not spent inside junior, senior or policy handlers is the
  // intent UI's own coordination time.
  run.record.timings.push_back({role::kIntentUi, "coordination", 0, 0.0, run.record.total_ms,
                                std::max(0.0, run.record.total_ms - run.agent_ms)});
  publish(run);
}

PipelineRecord Orchestrator::run_pipeline(const std::string& intent_text, const std::string& source) {
  auto run = start_run(intent_text, source);
  finish(*run);
  std::lock_guard lock(mu_);
  return records_.at(run->record.task_id);
}

std::string Orchestrator::submit(const std::string& intent_text, const std::string& source) {
  std::shared_ptr<Run> run = start_run(intent_text, source);
  auto fut = std::async(std::launch::async, [this, run] { finish(*run); });
  std::lock_guard lock(mu_);
  pending_.push_back(std::move(fut));
  return run->record.task_id;
}

std::optional<PipelineRecord> Orchestrator::find(const std::string& task_id) const {
  std::lock_guard lock(mu_);
  const auto it = records_.find(task_id);
  if (it == records_.end()) return std::nullopt;
  return it->second;
}

std::vector<PipelineRecord> Orchestrator::records() const {
  std::lock_guard lock(mu_);
  std::vector<PipelineRecord> out;
  for (const auto& id : order_) out.push_back(records_.at(id));
  return out;
}

void Orchestrator::wait_all() {
  std::vector<std::future<void>> pending;
  {
    std::lock_guard lock(mu_);
    pending.swap(pending_);
  }
  for (auto& f : pending) f.wait();
}

void Orchestrator::mount(a2a::Server& server) {
  server.add_post("/intent", [this](const a2a::HttpRequest& req) {
    const auto body = json::parse(req.body, nullptr, false);
    if (body.is_discarded() || !body.is_object() || !body.contains("text") || !body["text"].is_string()) {
      return a2a::HttpReply{400, json{{"code", errc::kBadRequest}, {"message", "expected {\"text\": ...}"}}.dump()};
    }
    try {
      return a2a::HttpReply{202, json{{"task_id", submit(body["text"].get<std::string>())}}.dump()};
    } catch (const Error& e) {
      return a2a::HttpReply{400, json{{"code", e.code()}, {"message", e.what()}}.dump()};
    }
  });
  server.add_get(R"(/intent/([^/]+))", [this](const a2a::HttpRequest& req) {
    const auto rec = find(req.matches.at(0));
    if (!rec) return a2a::HttpReply{404, json{{"code", "UNKNOWN_TASK"}, {"message", req.matches.at(0)}}.dump()};
    return a2a::HttpReply{200, json(*rec).dump()};
  });
  server.add_get("/report/timing", [this](const a2a::HttpRequest& req) {
    int iterations = 3;
    if (const auto it = req.params.find("iterations"); it != req.params.end()) iterations = std::atoi(it->second.c_str());
    std::vector<PipelineRecord> done;
    for (auto& r : records()) {
      if (r.status == PipelineStatus::kCompleted) done.push_back(std::move(r));
    }
    try {
      return a2a::HttpReply{200, json{{"iterations", time_distribution(done, iterations)}}.dump()};
    } catch (const Error& e) {
      return a2a::HttpReply{404, json{{"code", e.code()}, {"message", e.what()}}.dump()};
    }
  });
}

a2a::Envelope Orchestrator::handle(const a2a::Envelope& request) {
  if (request.kind != MessageKind::kIntentRequest) {
    throw Error(errc::kBadRequest, "intent_ui only accepts INTENT_REQUEST");
  }
  const auto rec = run_pipeline(request.payload.at("text").get<std::string>(), request.from_agent);
  return a2a::make_response(request, MessageKind::kAck,
                            json{{"task_id", rec.task_id}, {"status", to_string(rec.status)}});
}

}  // namespace ibn

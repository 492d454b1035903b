#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "ibn/a2a.hpp"
#include "ibn/domain.hpp"
#include "ibn/emulation.hpp"
#include "ibn/mcp_state.hpp"

namespace ibn {

struct OrchestratorSettings {
  int phase1_max_attempts = 3;
  int phase2_max_attempts = 3;
  // Re-run the juniors when phase 2 fails instead of only re-weighting.
  bool phase2_full_restart = false;
  std::uint64_t seed = 42;
  double pseudo_edge_cost = 0.0;
  // Artificial coordination work done by the intent UI itself per run.
  double coordination_delay_ms = 0.0;
};

struct Timing {
  std::string agent_role;
  std::string phase;
  int attempt = 0;
  double started_ms = 0.0;   // request sent, relative to the start of the run
  double finished_ms = 0.0;  // response received
  double elapsed_ms = 0.0;   // time inside the agent's handler
};

// Phase results are folded from the task's envelopes, so the same reducer
// rebuilds them from a message log.
class PhaseResults {
 public:
  void ingest(const a2a::Envelope& e);
  const json& value() const { return value_; }
  bool complete() const;

 private:
  json value_ = {{"proposals", json::array({nullptr, nullptr})},
                 {"consensus", nullptr},
                 {"validation_reports_phase1", json::array()},
                 {"deployment_result", nullptr},
                 {"validation_reports_phase2", json::array()},
                 {"routing_decision", nullptr},
                 {"route_artifacts", nullptr}};
};

enum class PipelineStatus { kRunning, kCompleted, kFailed };

std::string to_string(PipelineStatus s);

struct PipelineRecord {
  std::string task_id;
  Intent intent;
  json phase_results;
  PipelineStatus status = PipelineStatus::kRunning;
  std::string failure_code;
  std::string failure_message;
  std::vector<Timing> timings;
  double total_ms = 0.0;
};

void to_json(json& j, const Timing& v);
void from_json(const json& j, Timing& v);
void to_json(json& j, const PipelineRecord& v);
void from_json(const json& j, PipelineRecord& v);

// The record with timestamps, durations and timings removed, for
// run-to-run comparison.
json strip_volatile(const json& record);

// Rebuilds phase results for one task from logged envelopes.
json replay_phase_results(const std::vector<a2a::Envelope>& log, const std::string& task_id);

struct IterationShare {
  int iteration = 1;
  std::size_t runs = 0;
  double total_ms = 0.0;
  std::map<std::string, double> percentages;  // intent_ui, junior_both, senior, policy
};

// Splits records into `iterations` consecutive groups and reports each
// role's share of the group's summed time. Throws NO_RECORDS.
std::vector<IterationShare> time_distribution(const std::vector<PipelineRecord>& records, int iterations);

void to_json(json& j, const IterationShare& v);

class Orchestrator {
 public:
  using FaultSource = std::function<emulation::FaultPlan(int attempt)>;

  Orchestrator(std::shared_ptr<a2a::Client> client, std::shared_ptr<mcp::McpClient> state,
               OrchestratorSettings settings);
  ~Orchestrator();

  // Runs the whole pipeline synchronously. Throws INTENT_EMPTY; every
  // other failure ends up in the returned record.
  PipelineRecord run_pipeline(const std::string& intent_text, const std::string& source = "api");

  // Starts a run in the background and returns its task id.
  std::string submit(const std::string& intent_text, const std::string& source = "http");
  std::optional<PipelineRecord> find(const std::string& task_id) const;
  std::vector<PipelineRecord> records() const;  // in submission order
  void wait_all();

  // Fault plan applied to instantiation; attempt 0 is the initial deployment.
  void set_fault_plan(emulation::FaultPlan plan);
  void set_fault_source(FaultSource source);

  // POST /intent, GET /intent/{id}, GET /report/timing?iterations=N.
  void mount(a2a::Server& server);
  // The intent UI's own A2A endpoint (it accepts nothing but answers).
  a2a::Envelope handle(const a2a::Envelope& request);

  const OrchestratorSettings& settings() const { return settings_; }
  a2a::Client& client() { return *client_; }

 private:
  struct Run;
  std::unique_ptr<Run> start_run(const std::string& intent_text, const std::string& source);
  void execute(Run& run);
  void finish(Run& run);
  void publish(const Run& run);
  a2a::Delivery call(Run& run, const std::string& to, a2a::MessageKind kind, json payload, const std::string& phase,
                     int attempt, bool agent_time = true);
  JuniorProposal phase1(Run& run, int round);
  emulation::FaultPlan fault_plan(int attempt) const;

  std::shared_ptr<a2a::Client> client_;
  std::shared_ptr<mcp::McpClient> state_;
  OrchestratorSettings settings_;
  mutable std::mutex faults_mu_;
  FaultSource faults_;

  mutable std::mutex mu_;
  std::vector<std::string> order_;
  std::map<std::string, PipelineRecord> records_;
  std::vector<std::future<void>> pending_;
  std::atomic<std::uint64_t> counter_{0};
};

}  // namespace ibn

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include "ibn/a2a.hpp"
#include "ibn/emulation.hpp"
#include "ibn/junior_agent.hpp"
#include "ibn/model_gateway.hpp"
#include "ibn/orchestrator.hpp"
#include "ibn/policy_agent.hpp"
#include "ibn/senior_agent.hpp"

namespace ibn {

// Everything the fleet needs, loaded from one JSON file. Unknown keys are
// rejected so typos surface as CONFIG_INVALID.
struct SystemConfig {
  a2a::AgentRegistry registry = a2a::AgentRegistry::defaults();
  std::string backend = "mock";  // mock | remote
  json mock_rules;               // empty -> built-in table
  std::string mock_rules_path;
  ModelEndpoint default_endpoint{"http://127.0.0.1:11434/v1", "qwen3:1.7b"};
  std::map<std::string, ModelEndpoint> endpoints;  // per-role overrides
  std::uint64_t seed = 42;
  JuniorSettings junior;
  SeniorSettings senior;
  PolicySettings policy;
  OrchestratorSettings orchestrator;
  std::string log_path;
  std::string audit_path;
  std::string state_journal_path;
  std::optional<emulation::FaultPlan> fault_plan;

  const ModelEndpoint& endpoint_for(const std::string& role) const;
  json rules() const;
};

SystemConfig config_from_json(const json& j);
json config_to_json(const SystemConfig& c);
// Throws CONFIG_INVALID for a missing file, bad JSON, or bad values.
SystemConfig load_config(const std::filesystem::path& path);

}  // namespace ibn

#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <string>
#include <vector>

#include "ibn/a2a.hpp"
#include "ibn/config.hpp"
#include "ibn/junior_agent.hpp"
#include "ibn/mcp_state.hpp"
#include "ibn/orchestrator.hpp"
#include "ibn/policy_agent.hpp"
#include "ibn/senior_agent.hpp"

namespace ibn {

// The six roles wired together, either through the in-process transport or
// as HTTP listeners. With HTTP, `local_roles` selects which roles this
// process hosts; the others are reached at their registry addresses.
class Fleet {
 public:
  enum class Mode { kInProcess, kHttp };
  using DelayFn = std::function<double(const a2a::Envelope&)>;  // milliseconds

  static std::unique_ptr<Fleet> start(const SystemConfig& config, Mode mode, std::set<std::string> local_roles = {});
  ~Fleet();
  Fleet(const Fleet&) = delete;
  Fleet& operator=(const Fleet&) = delete;

  void stop();

  // Polls GET /health on every role until all answer. In-process fleets are
  // always ready.
  bool wait_ready(std::chrono::milliseconds timeout) const;

  // Artificial work added inside a role's handler, counted as that role's time.
  void set_handler_delay(const std::string& role, double ms);
  void set_handler_delay(const std::string& role, DelayFn fn);

  bool hosts(const std::string& role) const { return local_.count(role) != 0; }
  Orchestrator& orchestrator() { return *orchestrator_; }
  SeniorAgent& senior() { return *senior_; }
  mcp::StateStore& state() { return *store_; }
  a2a::MessageLog& log() { return *log_; }
  ModelGateway& gateway(const std::string& role) { return *gateways_.at(role); }
  const a2a::AgentRegistry& registry() const { return registry_; }
  Mode mode() const { return mode_; }

 private:
  Fleet() = default;
  a2a::Handler wrap(const std::string& role, a2a::Handler inner);

  Mode mode_ = Mode::kInProcess;
  std::set<std::string> local_;
  a2a::AgentRegistry registry_;
  std::shared_ptr<a2a::MessageLog> log_;
  std::shared_ptr<mcp::StateStore> store_;
  std::map<std::string, std::shared_ptr<ModelGateway>> gateways_;
  std::shared_ptr<JuniorAgent> junior1_;
  std::shared_ptr<JuniorAgent> junior2_;
  std::shared_ptr<SeniorAgent> senior_;
  std::shared_ptr<PolicyAgent> policy_;
  std::shared_ptr<Orchestrator> orchestrator_;
  std::vector<std::unique_ptr<a2a::Server>> servers_;

  mutable std::mutex delay_mu_;
  std::map<std::string, DelayFn> delays_;
};

}  // namespace ibn

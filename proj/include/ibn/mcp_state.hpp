#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "ibn/a2a.hpp"
#include "ibn/deployment.hpp"
#include "ibn/domain.hpp"

namespace ibn::mcp {

struct DeploymentRecord {
  std::string task_id;
  DeploymentDocument document;
  json result = json::object();  // must carry "success": bool
  std::string recorded_at;
};

struct NetworkState {
  std::optional<WeightedTopology> topology;
  std::map<std::string, LinkAttributes> live_attrs;  // link id -> current attributes
  std::vector<DeploymentRecord> deployments;
  std::string updated_at;

  double max_load() const;
};

// Load shifted by a jitter in [-0.1, 0.1] drawn from (seed, link id),
// clamped to [0, 1]. Other attributes are untouched.
double jittered_load(double load, std::uint64_t seed, const std::string& link_id);
std::map<std::string, LinkAttributes> jitter_live_attrs(const TopologySpec& spec, std::uint64_t seed);

// Single writer, many readers. Readers get immutable snapshots.
class StateStore {
 public:
  // With a journal path, existing lines are replayed and new deployments
  // appended.
  explicit StateStore(std::filesystem::path journal = {});

  // Appends the record; on success the topology is replaced and live
  // attributes reset to the spec values. Returns an acknowledgement.
  json record_deployment(const DeploymentDocument& doc, const json& result);

  std::shared_ptr<const NetworkState> snapshot() const;
  // Throws NO_TOPOLOGY.
  std::shared_ptr<const NetworkState> live_state(std::uint64_t seed) const;

  // POST /state/deployment, GET /state/topology, GET /state/live?seed=.
  void mount(a2a::Server& server);
  // A2A endpoint: DEPLOYMENT_RESULT {"document", "result", ...} -> ACK.
  a2a::Envelope handle(const a2a::Envelope& request);

 private:
  void apply(const DeploymentRecord& rec);

  mutable std::mutex mu_;
  std::shared_ptr<const NetworkState> state_;
  std::filesystem::path journal_;
};

class McpClient {
 public:
  virtual ~McpClient() = default;
  virtual std::shared_ptr<const NetworkState> live_state(std::uint64_t seed) = 0;
};

class LocalMcpClient : public McpClient {
 public:
  explicit LocalMcpClient(std::shared_ptr<StateStore> store) : store_(std::move(store)) {}
  std::shared_ptr<const NetworkState> live_state(std::uint64_t seed) override { return store_->live_state(seed); }

 private:
  std::shared_ptr<StateStore> store_;
};

// GET http://host:port/state/live?seed=. Maps 404 to NO_TOPOLOGY and
// connection failures to STATE_UNAVAILABLE.
class HttpMcpClient : public McpClient {
 public:
  explicit HttpMcpClient(a2a::AgentAddress addr, int timeout_ms = 10000) : addr_(std::move(addr)), timeout_ms_(timeout_ms) {}
  std::shared_ptr<const NetworkState> live_state(std::uint64_t seed) override;

 private:
  a2a::AgentAddress addr_;
  int timeout_ms_;
};

void to_json(json& j, const DeploymentRecord& v);
void from_json(const json& j, DeploymentRecord& v);
void to_json(json& j, const NetworkState& v);
void from_json(const json& j, NetworkState& v);

}  // namespace ibn::mcp

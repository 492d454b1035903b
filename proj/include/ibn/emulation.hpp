#pragma once

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "ibn/deployment.hpp"
#include "ibn/domain.hpp"

namespace ibn::emulation {

// JSON: {"fail_instruction": int|null, "links_down": [link ids],
//        "fail_attempts": [ints]}. fail_attempts limits the plan to those
// phase-2 attempts; absent means every attempt.
struct FaultPlan {
  std::optional<std::size_t> fail_instruction;
  std::vector<std::string> links_down;
  std::optional<std::set<int>> fail_attempts;

  bool empty() const { return !fail_instruction && links_down.empty(); }
  bool applies_to(int attempt) const { return !fail_attempts || fail_attempts->count(attempt) != 0; }
  // The plan as seen by one attempt (empty when it does not apply).
  FaultPlan for_attempt(int attempt) const;
};

void to_json(nlohmann::json& j, const FaultPlan& v);
void from_json(const nlohmann::json& j, FaultPlan& v);

struct EmulatedLink {
  std::string endpoint_a;
  std::string endpoint_b;
  LinkAttributes attrs;
  double weight = 0.0;
  bool up = true;
};

class EmulationHandle {
 public:
  const std::map<std::string, Node>& nodes() const { return nodes_; }
  const std::map<std::string, EmulatedLink>& links() const { return links_; }
  std::vector<std::string> links_down() const;

  void set_link_state(const std::string& id, bool up);  // UNKNOWN_NODE if the link is unknown

  // The built graph as a weighted topology (nodes and links in id order).
  WeightedTopology to_weighted_topology() const;

 private:
  friend EmulationHandle instantiate(const DeploymentDocument& doc, const FaultPlan& faults);
  TopologyKind kind_ = TopologyKind::kFullMesh;
  std::map<std::string, Node> nodes_;
  std::map<std::string, EmulatedLink> links_;
};

// Executes the instructions in order. Throws INSTANTIATION_FAILED with
// {"failed_instruction_index", "reason", "injected"}.
EmulationHandle instantiate(const DeploymentDocument& doc, const FaultPlan& faults = {});

struct ReachabilityReport {
  bool all_pairs_connected = true;
  std::vector<std::pair<std::string, std::string>> unreachable_pairs;  // ordered pairs
  std::vector<std::string> links_down;
};

ReachabilityReport check_reachability(const EmulationHandle& handle);

// Same nodes, links, attributes and weights regardless of listing order.
bool same_graph(const WeightedTopology& a, const WeightedTopology& b);

void to_json(nlohmann::json& j, const ReachabilityReport& v);

}  // namespace ibn::emulation

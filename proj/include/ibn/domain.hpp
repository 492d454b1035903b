#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace ibn {

using nlohmann::json;

enum class ServiceType { kEmbb, kUrllc, kMmtc };
enum class TopologyKind { kFullMesh, kPartialMesh, kHubAndSpoke };
enum class NodeRole { kSwitch, kRouter, kHost };
enum class RoutingStrategy { kSpf, kDual };
enum class MetricMode { kComposite, kHopCount };

std::string to_string(ServiceType v);
std::string to_string(TopologyKind v);
std::string to_string(NodeRole v);
std::string to_string(RoutingStrategy v);
std::string to_string(MetricMode v);

// Parsers are lenient about case and separators ("eMBB", "full-mesh",
// "hub and spoke") because model output feeds them.
std::optional<ServiceType> parse_service_type(std::string_view s);
std::optional<TopologyKind> parse_topology_kind(std::string_view s);
std::optional<NodeRole> parse_node_role(std::string_view s);
std::optional<RoutingStrategy> parse_routing_strategy(std::string_view s);

struct Intent {
  std::string intent_id;
  std::string raw_text;
  std::string submitted_at;
  std::string source;
};

struct LinkAttributes {
  double latency_ms = 1.0;
  double bandwidth_mbps = 100.0;
  double load = 0.0;
  double reliability = 1.0;

  bool operator==(const LinkAttributes&) const = default;
};

struct Node {
  std::string node_id;
  NodeRole role = NodeRole::kSwitch;
  std::string domain_id = "d0";

  bool operator==(const Node&) const = default;
};

struct Link {
  std::string endpoint_a;
  std::string endpoint_b;
  LinkAttributes attrs;

  // Canonical undirected id, "a--b" with a < b.
  std::string id() const;
  bool operator==(const Link&) const = default;
};

std::string link_id(std::string_view a, std::string_view b);

struct TopologySpec {
  TopologyKind kind = TopologyKind::kFullMesh;
  std::vector<Node> nodes;
  std::vector<Link> links;

  const Node* find_node(std::string_view id) const;
  std::size_t infrastructure_node_count() const;
  bool operator==(const TopologySpec&) const = default;
};

inline bool is_infrastructure(NodeRole r) { return r != NodeRole::kHost; }

struct JuniorProposal {
  std::string agent_id;
  std::string intent_id;
  ServiceType service_type = ServiceType::kEmbb;
  TopologySpec topology;
  json service_config = json::object();
  std::string model_raw_output;
};

struct WeightedTopology {
  TopologySpec spec;
  std::map<std::string, double> weights;  // link id -> cost
};

struct Violation {
  std::string code;
  std::string message;

  bool operator==(const Violation&) const = default;
};

namespace violation {
inline constexpr const char* kEmptyTopology = "EMPTY_TOPOLOGY";
inline constexpr const char* kDuplicateNode = "DUPLICATE_NODE";
inline constexpr const char* kUnknownEndpoint = "UNKNOWN_ENDPOINT";
inline constexpr const char* kSelfLoop = "SELF_LOOP";
inline constexpr const char* kDuplicateLink = "DUPLICATE_LINK";
inline constexpr const char* kAttrRange = "ATTR_RANGE";
inline constexpr const char* kHostAttachment = "HOST_ATTACHMENT";
inline constexpr const char* kDisconnected = "DISCONNECTED";
inline constexpr const char* kKindConformance = "KIND_CONFORMANCE";
inline constexpr const char* kWeightMissing = "WEIGHT_MISSING";
inline constexpr const char* kWeightInvalid = "WEIGHT_INVALID";
inline constexpr const char* kIncompatibleService = "INCOMPATIBLE_SERVICE";
inline constexpr const char* kInstantiationFailed = "INSTANTIATION_FAILED";
inline constexpr const char* kUnreachablePairs = "UNREACHABLE_PAIRS";
inline constexpr const char* kInjectedFault = "INJECTED_FAULT";
}  // namespace violation

struct ValidationOutcome {
  bool passed = true;
  std::vector<Violation> violations;
};

struct ValidationReport {
  int attempt = 1;
  bool passed = true;
  std::vector<Violation> violations;
  std::string timestamp;
};

struct MetricCoefficients {
  double w_latency = 1.0;
  double w_load = 0.0;
  double w_reliability = 0.0;

  bool valid() const;
  double sum() const { return w_latency + w_load + w_reliability; }
  MetricCoefficients normalized() const;
};

struct RoutingDecision {
  RoutingStrategy strategy = RoutingStrategy::kSpf;
  MetricMode metric = MetricMode::kComposite;
  MetricCoefficients coefficients;
  std::string rationale;
};

// Structural checks: ids, endpoints, attribute ranges, connectivity and the
// kind-specific link arithmetic over infrastructure nodes.
ValidationOutcome validate_topology_spec(const TopologySpec& spec);

ValidationOutcome validate_weighted_topology(const WeightedTopology& wt);

std::vector<Violation> check_link_attributes(const Link& link);

std::string utc_now_iso();

// JSON mapping. Field names follow the lower_snake_case wire schema.
void to_json(json& j, const Intent& v);
void from_json(const json& j, Intent& v);
void to_json(json& j, const LinkAttributes& v);
void from_json(const json& j, LinkAttributes& v);
void to_json(json& j, const Node& v);
void from_json(const json& j, Node& v);
void to_json(json& j, const Link& v);
void from_json(const json& j, Link& v);
void to_json(json& j, const TopologySpec& v);
void from_json(const json& j, TopologySpec& v);
void to_json(json& j, const JuniorProposal& v);
void from_json(const json& j, JuniorProposal& v);
void to_json(json& j, const WeightedTopology& v);
void from_json(const json& j, WeightedTopology& v);
void to_json(json& j, const Violation& v);
void from_json(const json& j, Violation& v);
void to_json(json& j, const ValidationOutcome& v);
void to_json(json& j, const ValidationReport& v);
void from_json(const json& j, ValidationReport& v);
void to_json(json& j, const MetricCoefficients& v);
void from_json(const json& j, MetricCoefficients& v);
void to_json(json& j, const RoutingDecision& v);
void from_json(const json& j, RoutingDecision& v);
void to_json(json& j, ServiceType v);
void from_json(const json& j, ServiceType& v);
void to_json(json& j, TopologyKind v);
void from_json(const json& j, TopologyKind& v);

}  // namespace ibn

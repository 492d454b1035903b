#pragma once

#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ibn/domain.hpp"

namespace ibn::raas {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

struct GraphNode {
  std::string id;
  NodeRole role = NodeRole::kRouter;
  std::string domain_id;
  bool border = false;
  bool pseudo = false;
};

struct GraphEdge {
  std::size_t to = 0;
  LinkAttributes attrs;
  int port = 0;  // 1-based, in link creation order at the owning node
  bool pseudo = false;
  std::string link_id;  // id of the source link (spec or domain graph)
};

// Undirected multigraph-free graph with per-node port numbering.
class Graph {
 public:
  std::size_t add_node(GraphNode node);  // BAD_REQUEST on duplicate id
  void add_link(const std::string& a, const std::string& b, const LinkAttributes& attrs, bool pseudo = false,
                std::string link_id = {});  // UNKNOWN_NODE, BAD_REQUEST on self loop or duplicate

  std::optional<std::size_t> index_of(const std::string& id) const;
  std::size_t require(const std::string& id) const;  // UNKNOWN_NODE
  const std::vector<GraphNode>& nodes() const { return nodes_; }
  const std::vector<GraphEdge>& adjacency(std::size_t i) const { return adj_[i]; }
  const GraphEdge* edge_between(std::size_t a, std::size_t b) const;
  std::size_t size() const { return nodes_.size(); }

  // Plain graph over the spec's nodes and links; `live` overrides attributes.
  static Graph from_topology(const TopologySpec& spec, const std::map<std::string, LinkAttributes>& live = {});

 private:
  std::vector<GraphNode> nodes_;
  std::vector<std::vector<GraphEdge>> adj_;
  std::map<std::string, std::size_t> index_;
};

// w_latency*latency + w_load*100*load + w_reliability*100*(1-reliability),
// floored at 0.001; 1 per link in hop-count mode.
double composite_cost(const LinkAttributes& attrs, const MetricCoefficients& coeff,
                      MetricMode mode = MetricMode::kComposite);

struct CostModel {
  MetricCoefficients coeff;
  MetricMode mode = MetricMode::kComposite;
  double pseudo_cost = 0.0;
  // When non-empty, real links are costed by these weights (keyed by
  // GraphEdge::link_id) instead of the composite metric.
  std::map<std::string, double> link_weights;

  double edge_cost(const GraphEdge& e) const;
};

struct ShortestPathTree {
  std::string source;
  std::vector<std::string> ids;
  std::vector<double> distance;  // kInfinity when unreachable
  std::vector<std::optional<std::size_t>> predecessor;

  double distance_to(const std::string& id) const;
  // Node ids from source to id; empty when unreachable.
  std::vector<std::string> path_to(const std::string& id) const;
  std::vector<std::string> unreachable() const;
};

// Dijkstra. Equal-cost ties go to the predecessor with the smallest id.
// Throws UNKNOWN_NODE.
ShortestPathTree spf(const Graph& g, const std::string& src, const CostModel& cost);

struct FeasibleSuccessor {
  std::string node;
  double reported_distance = 0.0;
};

struct RouteEntry {
  std::string destination;
  bool reachable = true;
  std::string successor;
  double feasible_distance = kInfinity;
  std::vector<FeasibleSuccessor> feasible_successors;  // excludes the successor
};

struct RouteTable {
  std::string source;
  std::vector<RouteEntry> routes;  // destinations in node order, source excluded

  const RouteEntry* find(const std::string& destination) const;
};

// Converged DUAL state: FD is the shortest distance, RD(n) the neighbour's
// own shortest distance, and n is feasible iff RD(n) < FD.
RouteTable dual_routes(const Graph& g, const std::string& src, const CostModel& cost);

// Shortest-path trees rooted at every node, for repeated route queries.
class AllTrees {
 public:
  AllTrees(const Graph& g, const CostModel& cost);
  const ShortestPathTree& from(const std::string& id) const;
  RouteTable dual(const std::string& src) const;
  // Hop-by-hop path following each node's DUAL successor; falls back to the
  // source's SPF path if the chain would revisit a node.
  std::vector<std::string> dual_path(const std::string& src, const std::string& dst) const;

 private:
  const Graph* g_;
  std::vector<ShortestPathTree> trees_;
};

struct DomainNode {
  std::string node_id;
  NodeRole role = NodeRole::kRouter;
  bool border = false;
};

struct DomainGraph {
  std::string domain_id;
  std::vector<DomainNode> nodes;
  std::vector<Link> links;  // endpoints are local node ids
};

struct GlobalGraph {
  Graph graph;
  std::string pseudo_node_id = "PSEUDO";
  std::vector<std::string> pseudo_links;  // link ids pseudo--border
};

std::string global_id(const std::string& domain_id, const std::string& node_id);

// Union with "domain/node" ids plus a pseudo node linked to every border.
// inter_links use global ids. Throws DUPLICATE_DOMAIN_ID.
GlobalGraph aggregate_domains(const std::vector<DomainGraph>& domains, const std::vector<Link>& inter_links = {});

struct SplitTopology {
  std::vector<DomainGraph> domains;
  std::vector<Link> inter_links;  // global ids
};

// Groups a spec by domain_id. With several domains, nodes on inter-domain
// links are borders (or the smallest id when a domain has none).
SplitTopology split_domains(const TopologySpec& spec, const std::map<std::string, LinkAttributes>& live = {});

std::vector<std::string> splice_pseudo_node(const std::vector<std::string>& path, const GlobalGraph& global);

struct FlowEntry {
  std::string switch_id;
  std::string match_dst;
  int out_port = 0;
  std::string next_hop;
};

struct RouteMapEntry {
  std::string router_id;
  std::string prefix;  // "<destination>/32"
  std::string next_hop;
};

// One entry per switch hop. A hop joined by splicing leaves through the
// node's pseudo uplink. Throws BROKEN_PATH, UNKNOWN_NODE.
std::vector<FlowEntry> paths_to_flow_entries(const std::vector<std::string>& path, const Graph& g);
// One entry per router or host hop. Throws BROKEN_PATH, UNKNOWN_NODE.
std::vector<RouteMapEntry> paths_to_route_maps(const std::vector<std::string>& path, const Graph& g);

// Follows the entries from src; returns the visited hops (stops on a
// missing entry or a repeated node).
std::vector<std::string> replay_entries(const std::string& src, const std::string& dst,
                                        const std::vector<FlowEntry>& flows, const std::vector<RouteMapEntry>& maps,
                                        const Graph& g);

struct PathArtifact {
  std::string src;
  std::string dst;
  std::vector<std::string> path;
  double cost = 0.0;
  std::vector<FlowEntry> flow_entries;
  std::vector<RouteMapEntry> route_maps;
};

struct RouteComputation {
  RoutingStrategy strategy = RoutingStrategy::kSpf;
  std::vector<std::string> endpoints;
  std::vector<PathArtifact> paths;
  std::map<std::string, RouteTable> dual_tables;  // DUAL only, per endpoint
  double total_cost = 0.0;
  std::vector<std::pair<std::string, std::string>> unreachable;
};

// Hosts when present, otherwise every infrastructure node (global ids).
std::vector<std::string> route_endpoints(const GlobalGraph& global);

// Paths for every ordered endpoint pair on the aggregated graph.
RouteComputation compute_routes(const TopologySpec& spec, const RoutingDecision& decision,
                                const std::map<std::string, LinkAttributes>& live = {}, double pseudo_cost = 0.0);

// Total SPF cost and total DUAL FD over every ordered endpoint pair, with
// the senior's weights as link costs.
struct CostSummary {
  double spf_total = 0.0;
  double dual_fd_total = 0.0;
  std::size_t pairs = 0;
  std::size_t unreachable_pairs = 0;
};

CostSummary analyse_costs(const WeightedTopology& wt, const std::vector<std::string>& links_down = {});

void to_json(json& j, const FlowEntry& v);
void to_json(json& j, const RouteMapEntry& v);
void to_json(json& j, const FeasibleSuccessor& v);
void to_json(json& j, const RouteEntry& v);
void to_json(json& j, const RouteTable& v);
void to_json(json& j, const PathArtifact& v);
void to_json(json& j, const RouteComputation& v);
void to_json(json& j, const CostSummary& v);

}  // namespace ibn::raas

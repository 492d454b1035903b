#include "ibn/raas.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <set>
#include <tuple>

#include "ibn/error.hpp"

namespace ibn::raas {

namespace {

bool nearly_equal(double a, double b) { return std::fabs(a - b) <= 1e-12 * std::max({1.0, std::fabs(a), std::fabs(b)}); }

}  // namespace

// ---- graph -----------------------------------------------------------------

std::size_t Graph::add_node(GraphNode node) {
  if (index_.count(node.id) != 0) throw Error(errc::kBadRequest, "duplicate node '" + node.id + "'");
  const auto i = nodes_.size();
  index_.emplace(node.id, i);
  nodes_.push_back(std::move(node));
  adj_.emplace_back();
  return i;
}

void Graph::add_link(const std::string& a, const std::string& b, const LinkAttributes& attrs, bool pseudo,
                     std::string id) {
  const auto ia = require(a);
  const auto ib = require(b);
  if (ia == ib) throw Error(errc::kBadRequest, "self loop at '" + a + "'");
  if (edge_between(ia, ib) != nullptr) throw Error(errc::kBadRequest, "duplicate link " + link_id(a, b));
  if (id.empty()) id = link_id(a, b);
  adj_[ia].push_back({ib, attrs, static_cast<int>(adj_[ia].size()) + 1, pseudo, id});
  adj_[ib].push_back({ia, attrs, static_cast<int>(adj_[ib].size()) + 1, pseudo, id});
}

std::optional<std::size_t> Graph::index_of(const std::string& id) const {
  const auto it = index_.find(id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t Graph::require(const std::string& id) const {
  const auto i = index_of(id);
  if (!i) throw Error(errc::kUnknownNode, "no node '" + id + "'", {{"node", id}});
  return *i;
}

const GraphEdge* Graph::edge_between(std::size_t a, std::size_t b) const {
  for (const auto& e : adj_[a]) {
    if (e.to == b) return &e;
  }
  return nullptr;
}

Graph Graph::from_topology(const TopologySpec& spec, const std::map<std::string, LinkAttributes>& live) {
  Graph g;
  for (const auto& n : spec.nodes) g.add_node({n.node_id, n.role, n.domain_id, false, false});
  for (const auto& l : spec.links) {
    const auto it = live.find(l.id());
    g.add_link(l.endpoint_a, l.endpoint_b, it == live.end() ? l.attrs : it->second, false, l.id());
  }
  return g;
}

// ---- costs -----------------------------------------------------------------

double composite_cost(const LinkAttributes& attrs, const MetricCoefficients& coeff, MetricMode mode) {
  if (mode == MetricMode::kHopCount) return 1.0;
  const double c = coeff.w_latency * attrs.latency_ms + coeff.w_load * (100.0 * attrs.load) +
                   coeff.w_reliability * (100.0 * (1.0 - attrs.reliability));
  return std::max(c, 0.001);
}

double CostModel::edge_cost(const GraphEdge& e) const {
  if (e.pseudo) return pseudo_cost;
  if (!link_weights.empty()) {
    if (const auto it = link_weights.find(e.link_id); it != link_weights.end()) return it->second;
  }
  return composite_cost(e.attrs, coeff, mode);
}

// ---- SPF -------------------------------------------------------------------

double ShortestPathTree::distance_to(const std::string& id) const {
  const auto it = std::find(ids.begin(), ids.end(), id);
  if (it == ids.end()) throw Error(errc::kUnknownNode, "no node '" + id + "'", {{"node", id}});
  return distance[static_cast<std::size_t>(it - ids.begin())];
}

std::vector<std::string> ShortestPathTree::path_to(const std::string& id) const {
  const auto it = std::find(ids.begin(), ids.end(), id);
  if (it == ids.end()) throw Error(errc::kUnknownNode, "no node '" + id + "'", {{"node", id}});
  auto i = static_cast<std::size_t>(it - ids.begin());
  if (distance[i] == kInfinity) return {};
  std::vector<std::string> path{ids[i]};
  while (predecessor[i]) {
    i = *predecessor[i];
    path.push_back(ids[i]);
  }
  std::reverse(path.begin(), path.end());
  return path;
}

std::vector<std::string> ShortestPathTree::unreachable() const {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (distance[i] == kInfinity) out.push_back(ids[i]);
  }
  return out;
}

ShortestPathTree spf(const Graph& g, const std::string& src, const CostModel& cost) {
  const auto s = g.require(src);
  const auto n = g.size();
  ShortestPathTree t;
  t.source = src;
  t.distance.assign(n, kInfinity);
  t.predecessor.assign(n, std::nullopt);
  for (const auto& node : g.nodes()) t.ids.push_back(node.id);

  // Rank by id so equal distances settle in id order.
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return t.ids[a] < t.ids[b]; });
  std::vector<std::size_t> rank(n);
  for (std::size_t r = 0; r < n; ++r) rank[order[r]] = r;

  using Item = std::tuple<double, std::size_t, std::size_t>;  // distance, rank, index
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  std::vector<bool> settled(n, false);
  t.distance[s] = 0.0;
  pq.emplace(0.0, rank[s], s);
  while (!pq.empty()) {
    const auto [d, r, u] = pq.top();
    pq.pop();
    if (settled[u] || d > t.distance[u]) continue;
    settled[u] = true;
    for (const auto& e : g.adjacency(u)) {
      if (settled[e.to]) continue;
      const double nd = d + cost.edge_cost(e);
      auto& cur = t.distance[e.to];
      if (cur != kInfinity && nearly_equal(nd, cur)) {
        // Tie: keep the smallest predecessor id. u is settled, so the tree
        // stays acyclic even across zero-cost edges.
        if (t.ids[u] < t.ids[*t.predecessor[e.to]]) t.predecessor[e.to] = u;
      } else if (nd < cur) {
        cur = nd;
        t.predecessor[e.to] = u;
        pq.emplace(nd, rank[e.to], e.to);
      }
    }
  }
  return t;
}

// ---- DUAL ------------------------------------------------------------------

const RouteEntry* RouteTable::find(const std::string& destination) const {
  for (const auto& r : routes) {
    if (r.destination == destination) return &r;
  }
  return nullptr;
}

AllTrees::AllTrees(const Graph& g, const CostModel& cost) : g_(&g) {
  trees_.reserve(g.size());
  for (const auto& node : g.nodes()) trees_.push_back(spf(g, node.id, cost));
}

const ShortestPathTree& AllTrees::from(const std::string& id) const { return trees_[g_->require(id)]; }

RouteTable AllTrees::dual(const std::string& src) const {
  const auto s = g_->require(src);
  const auto& own = trees_[s];
  RouteTable table;
  table.source = src;

  auto neighbours = g_->adjacency(s);
  std::sort(neighbours.begin(), neighbours.end(),
            [&](const GraphEdge& a, const GraphEdge& b) { return own.ids[a.to] < own.ids[b.to]; });

  for (std::size_t d = 0; d < g_->size(); ++d) {
    if (d == s || g_->nodes()[d].pseudo) continue;
    RouteEntry entry;
    entry.destination = own.ids[d];
    entry.feasible_distance = own.distance[d];
    if (entry.feasible_distance == kInfinity) {
      entry.reachable = false;
      table.routes.push_back(std::move(entry));
      continue;
    }
    entry.successor = own.path_to(own.ids[d])[1];
    for (const auto& e : neighbours) {
      const double rd = trees_[e.to].distance[d];
      if (own.ids[e.to] == entry.successor) continue;
      // Strict feasibility, with a margin so rounding never admits RD == FD.
      if (rd < entry.feasible_distance - 1e-9 * std::max(1.0, entry.feasible_distance)) {
        entry.feasible_successors.push_back({own.ids[e.to], rd});
      }
    }
    table.routes.push_back(std::move(entry));
  }
  return table;
}

std::vector<std::string> AllTrees::dual_path(const std::string& src, const std::string& dst) const {
  const auto d = g_->require(dst);
  std::vector<std::string> path{src};
  std::set<std::string> seen{src};
  std::string cur = src;
  while (cur != dst) {
    const auto& t = trees_[g_->require(cur)];
    if (t.distance[d] == kInfinity) return {};
    const auto hop = t.path_to(dst)[1];
    if (!seen.insert(hop).second) return from(src).path_to(dst);
    path.push_back(hop);
    cur = hop;
  }
  return path;
}

RouteTable dual_routes(const Graph& g, const std::string& src, const CostModel& cost) {
  return AllTrees(g, cost).dual(src);
}

// ---- domains ---------------------------------------------------------------

std::string global_id(const std::string& domain_id, const std::string& node_id) { return domain_id + "/" + node_id; }

GlobalGraph aggregate_domains(const std::vector<DomainGraph>& domains, const std::vector<Link>& inter_links) {
  GlobalGraph out;
  std::set<std::string> seen;
  for (const auto& d : domains) {
    if (!seen.insert(d.domain_id).second) {
      throw Error(errc::kDuplicateDomainId, "domain '" + d.domain_id + "' appears twice", {{"domain_id", d.domain_id}});
    }
  }
  for (const auto& d : domains) {
    for (const auto& n : d.nodes) out.graph.add_node({global_id(d.domain_id, n.node_id), n.role, d.domain_id, n.border});
    for (const auto& l : d.links) {
      out.graph.add_link(global_id(d.domain_id, l.endpoint_a), global_id(d.domain_id, l.endpoint_b), l.attrs, false,
                         l.id());
    }
  }
  for (const auto& l : inter_links) out.graph.add_link(l.endpoint_a, l.endpoint_b, l.attrs, false, l.id());

  out.graph.add_node({out.pseudo_node_id, NodeRole::kRouter, "", false, true});
  for (const auto& d : domains) {
    for (const auto& n : d.nodes) {
      if (!n.border) continue;
      const auto gid = global_id(d.domain_id, n.node_id);
      LinkAttributes zero;
      zero.latency_ms = 0.0;
      out.graph.add_link(out.pseudo_node_id, gid, zero, true);
      out.pseudo_links.push_back(link_id(out.pseudo_node_id, gid));
    }
  }
  return out;
}

SplitTopology split_domains(const TopologySpec& spec, const std::map<std::string, LinkAttributes>& live) {
  std::map<std::string, DomainGraph> by_domain;
  std::map<std::string, std::string> domain_of;
  for (const auto& n : spec.nodes) {
    auto& d = by_domain[n.domain_id];
    d.domain_id = n.domain_id;
    d.nodes.push_back({n.node_id, n.role, false});
    domain_of[n.node_id] = n.domain_id;
  }
  SplitTopology out;
  std::set<std::string> borders;
  for (const auto& l : spec.links) {
    Link copy = l;
    if (const auto it = live.find(l.id()); it != live.end()) copy.attrs = it->second;
    const auto& da = domain_of.at(l.endpoint_a);
    const auto& db = domain_of.at(l.endpoint_b);
    if (da == db) {
      by_domain[da].links.push_back(copy);
    } else {
      borders.insert(l.endpoint_a);
      borders.insert(l.endpoint_b);
      copy.endpoint_a = global_id(da, l.endpoint_a);
      copy.endpoint_b = global_id(db, l.endpoint_b);
      out.inter_links.push_back(copy);
    }
  }
  const bool multi = by_domain.size() > 1;
  for (auto& [id, d] : by_domain) {
    if (multi) {
      bool any = false;
      for (auto& n : d.nodes) {
        n.border = borders.count(n.node_id) != 0;
        any = any || n.border;
      }
      if (!any && !d.nodes.empty()) {
        std::min_element(d.nodes.begin(), d.nodes.end(), [](const DomainNode& a, const DomainNode& b) {
          return a.node_id < b.node_id;
        })->border = true;
      }
    }
    out.domains.push_back(std::move(d));
  }
  return out;
}

std::vector<std::string> splice_pseudo_node(const std::vector<std::string>& path, const GlobalGraph& global) {
  std::vector<std::string> out;
  out.reserve(path.size());
  for (const auto& hop : path) {
    if (hop != global.pseudo_node_id) out.push_back(hop);
  }
  return out;
}

// ---- entries ---------------------------------------------------------------

namespace {

const GraphEdge* pseudo_uplink(const Graph& g, std::size_t node) {
  for (const auto& e : g.adjacency(node)) {
    if (e.pseudo) return &e;
  }
  return nullptr;
}

// Edge used to leave `from` toward `to`: the direct link, or the pseudo
// uplink when both ends hang off the same pseudo node.
const GraphEdge& hop_edge(const Graph& g, std::size_t from, std::size_t to) {
  if (const auto* e = g.edge_between(from, to)) return *e;
  const auto* up_a = pseudo_uplink(g, from);
  const auto* up_b = pseudo_uplink(g, to);
  if (up_a != nullptr && up_b != nullptr && up_a->to == up_b->to) return *up_a;
  throw Error(errc::kBrokenPath, "no link between '" + g.nodes()[from].id + "' and '" + g.nodes()[to].id + "'",
              {{"from", g.nodes()[from].id}, {"to", g.nodes()[to].id}});
}

}  // namespace

std::vector<FlowEntry> paths_to_flow_entries(const std::vector<std::string>& path, const Graph& g) {
  std::vector<FlowEntry> out;
  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    const auto from = g.require(path[i]);
    const auto& edge = hop_edge(g, from, g.require(path[i + 1]));
    if (g.nodes()[from].role == NodeRole::kSwitch) out.push_back({path[i], path.back(), edge.port, path[i + 1]});
  }
  return out;
}

std::vector<RouteMapEntry> paths_to_route_maps(const std::vector<std::string>& path, const Graph& g) {
  std::vector<RouteMapEntry> out;
  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    const auto from = g.require(path[i]);
    hop_edge(g, from, g.require(path[i + 1]));
    if (g.nodes()[from].role != NodeRole::kSwitch) out.push_back({path[i], path.back() + "/32", path[i + 1]});
  }
  return out;
}

std::vector<std::string> replay_entries(const std::string& src, const std::string& dst,
                                        const std::vector<FlowEntry>& flows, const std::vector<RouteMapEntry>& maps,
                                        const Graph& g) {
  std::vector<std::string> hops{src};
  std::set<std::string> seen{src};
  std::string cur = src;
  while (cur != dst) {
    std::optional<std::string> next;
    for (const auto& f : flows) {
      if (f.switch_id != cur || f.match_dst != dst) continue;
      for (const auto& e : g.adjacency(g.require(cur))) {
        if (e.port == f.out_port) next = g.nodes()[e.to].pseudo ? f.next_hop : g.nodes()[e.to].id;
      }
      break;
    }
    if (!next) {
      for (const auto& m : maps) {
        if (m.router_id == cur && m.prefix == dst + "/32") {
          next = m.next_hop;
          break;
        }
      }
    }
    if (!next || !seen.insert(*next).second) break;
    hops.push_back(*next);
    cur = *next;
  }
  return hops;
}

// ---- pipeline helpers ------------------------------------------------------

std::vector<std::string> route_endpoints(const GlobalGraph& global) {
  std::vector<std::string> hosts;
  std::vector<std::string> infra;
  for (const auto& n : global.graph.nodes()) {
    if (n.pseudo) continue;
    (n.role == NodeRole::kHost ? hosts : infra).push_back(n.id);
  }
  auto& out = hosts.empty() ? infra : hosts;
  std::sort(out.begin(), out.end());
  return out;
}

namespace {

double path_cost(const Graph& g, const std::vector<std::string>& path, const CostModel& cost) {
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    total += cost.edge_cost(*g.edge_between(g.require(path[i]), g.require(path[i + 1])));
  }
  return total;
}

}  // namespace

RouteComputation compute_routes(const TopologySpec& spec, const RoutingDecision& decision,
                                const std::map<std::string, LinkAttributes>& live, double pseudo_cost) {
  const auto split = split_domains(spec, live);
  const auto global = aggregate_domains(split.domains, split.inter_links);
  CostModel cost{decision.coefficients, decision.metric, pseudo_cost, {}};
  const AllTrees trees(global.graph, cost);

  RouteComputation out;
  out.strategy = decision.strategy;
  out.endpoints = route_endpoints(global);
  for (const auto& s : out.endpoints) {
    if (decision.strategy == RoutingStrategy::kDual) out.dual_tables.emplace(s, trees.dual(s));
    for (const auto& d : out.endpoints) {
      if (s == d) continue;
      const auto raw = decision.strategy == RoutingStrategy::kDual ? trees.dual_path(s, d) : trees.from(s).path_to(d);
      if (raw.empty()) {
        out.unreachable.emplace_back(s, d);
        continue;
      }
      PathArtifact a;
      a.src = s;
      a.dst = d;
      a.cost = path_cost(global.graph, raw, cost);
      a.path = splice_pseudo_node(raw, global);
      a.flow_entries = paths_to_flow_entries(a.path, global.graph);
      a.route_maps = paths_to_route_maps(a.path, global.graph);
      out.total_cost += a.cost;
      out.paths.push_back(std::move(a));
    }
  }
  return out;
}

CostSummary analyse_costs(const WeightedTopology& wt, const std::vector<std::string>& links_down) {
  TopologySpec up = wt.spec;
  std::erase_if(up.links, [&](const Link& l) {
    return std::find(links_down.begin(), links_down.end(), l.id()) != links_down.end();
  });
  const auto g = Graph::from_topology(up);
  CostModel cost;
  cost.link_weights = wt.weights;
  const AllTrees trees(g, cost);

  std::vector<std::string> endpoints;
  for (const auto& n : up.nodes) {
    if (n.role == NodeRole::kHost) endpoints.push_back(n.node_id);
  }
  if (endpoints.empty()) {
    for (const auto& n : up.nodes) endpoints.push_back(n.node_id);
  }
  std::sort(endpoints.begin(), endpoints.end());

  CostSummary out;
  for (const auto& s : endpoints) {
    const auto& tree = trees.from(s);
    const auto table = trees.dual(s);
    for (const auto& d : endpoints) {
      if (s == d) continue;
      ++out.pairs;
      const double dist = tree.distance_to(d);
      if (dist == kInfinity) {
        ++out.unreachable_pairs;
        continue;
      }
      out.spf_total += dist;
      out.dual_fd_total += table.find(d)->feasible_distance;
    }
  }
  return out;
}

// ---- JSON ------------------------------------------------------------------

void to_json(json& j, const FlowEntry& v) {
  j = json{{"switch_id", v.switch_id}, {"match_dst", v.match_dst}, {"out_port", v.out_port}, {"next_hop", v.next_hop}};
}

void to_json(json& j, const RouteMapEntry& v) {
  j = json{{"router_id", v.router_id}, {"prefix", v.prefix}, {"next_hop", v.next_hop}};
}

void to_json(json& j, const FeasibleSuccessor& v) {
  j = json{{"node", v.node}, {"reported_distance", v.reported_distance}};
}

void to_json(json& j, const RouteEntry& v) {
  j = json{{"destination", v.destination},
           {"reachable", v.reachable},
           {"successor", v.successor},
           {"distance", v.reachable ? json(v.feasible_distance) : json(nullptr)},
           {"feasible_successors", v.feasible_successors}};
}

void to_json(json& j, const RouteTable& v) { j = json{{"source", v.source}, {"routes", v.routes}}; }

void to_json(json& j, const PathArtifact& v) {
  j = json{{"src", v.src},
           {"dst", v.dst},
           {"path", v.path},
           {"cost", v.cost},
           {"flow_entries", v.flow_entries},
           {"route_maps", v.route_maps}};
}

void to_json(json& j, const RouteComputation& v) {
  json unreachable = json::array();
  for (const auto& [a, b] : v.unreachable) unreachable.push_back({a, b});
  j = json{{"strategy", to_string(v.strategy)},
           {"endpoints", v.endpoints},
           {"paths", v.paths},
           {"dual_tables", v.dual_tables},
           {"total_cost", v.total_cost},
           {"unreachable", unreachable}};
}

void to_json(json& j, const CostSummary& v) {
  j = json{{"spf_total", v.spf_total},
           {"dual_fd_total", v.dual_fd_total},
           {"pairs", v.pairs},
           {"unreachable_pairs", v.unreachable_pairs}};
}

}  // namespace ibn::raas

#include "ibn/domain.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <ctime>
#include <queue>
#include <set>
#include <unordered_map>

#include "ibn/error.hpp"

namespace ibn {

namespace {

// Uppercase, with '-' and ' ' folded to '_'.
std::string canonical_token(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    if (c == '-' || c == ' ') {
      out.push_back('_');
    } else {
      out.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
    }
  }
  return out;
}

template <typename E>
E enum_from_json(const json& j, std::optional<E> (*parse)(std::string_view), const char* what) {
  if (!j.is_string()) throw Error(errc::kBadRequest, std::string(what) + " must be a string");
  auto v = parse(j.get<std::string>());
  if (!v) throw Error(errc::kBadRequest, std::string("unknown ") + what + " '" + j.get<std::string>() + "'");
  return *v;
}

}  // namespace

std::string to_string(ServiceType v) {
  switch (v) {
    case ServiceType::kEmbb: return "EMBB";
    case ServiceType::kUrllc: return "URLLC";
    case ServiceType::kMmtc: return "MMTC";
  }
  return "?";
}

std::string to_string(TopologyKind v) {
  switch (v) {
    case TopologyKind::kFullMesh: return "FULL_MESH";
    case TopologyKind::kPartialMesh: return "PARTIAL_MESH";
    case TopologyKind::kHubAndSpoke: return "HUB_AND_SPOKE";
  }
  return "?";
}

std::string to_string(NodeRole v) {
  switch (v) {
    case NodeRole::kSwitch: return "switch";
    case NodeRole::kRouter: return "router";
    case NodeRole::kHost: return "host";
  }
  return "?";
}

std::string to_string(RoutingStrategy v) { return v == RoutingStrategy::kSpf ? "SPF" : "DUAL"; }

std::string to_string(MetricMode v) { return v == MetricMode::kHopCount ? "HOP_COUNT" : "COMPOSITE"; }

std::optional<ServiceType> parse_service_type(std::string_view s) {
  const auto t = canonical_token(s);
  if (t == "EMBB") return ServiceType::kEmbb;
  if (t == "URLLC") return ServiceType::kUrllc;
  if (t == "MMTC") return ServiceType::kMmtc;
  return std::nullopt;
}

std::optional<TopologyKind> parse_topology_kind(std::string_view s) {
  const auto t = canonical_token(s);
  if (t == "FULL_MESH" || t == "FULLMESH") return TopologyKind::kFullMesh;
  if (t == "PARTIAL_MESH" || t == "PARTIALMESH") return TopologyKind::kPartialMesh;
  if (t == "HUB_AND_SPOKE" || t == "HUB_SPOKE" || t == "STAR") return TopologyKind::kHubAndSpoke;
  return std::nullopt;
}

std::optional<NodeRole> parse_node_role(std::string_view s) {
  const auto t = canonical_token(s);
  if (t == "SWITCH") return NodeRole::kSwitch;
  if (t == "ROUTER") return NodeRole::kRouter;
  if (t == "HOST") return NodeRole::kHost;
  return std::nullopt;
}

std::optional<RoutingStrategy> parse_routing_strategy(std::string_view s) {
  const auto t = canonical_token(s);
  if (t == "SPF" || t == "OSPF") return RoutingStrategy::kSpf;
  if (t == "DUAL") return RoutingStrategy::kDual;
  return std::nullopt;
}

std::string link_id(std::string_view a, std::string_view b) {
  if (b < a) std::swap(a, b);
  std::string out(a);
  out += "--";
  out += b;
  return out;
}

std::string Link::id() const { return link_id(endpoint_a, endpoint_b); }

const Node* TopologySpec::find_node(std::string_view id) const {
  for (const auto& n : nodes) {
    if (n.node_id == id) return &n;
  }
  return nullptr;
}

std::size_t TopologySpec::infrastructure_node_count() const {
  return static_cast<std::size_t>(
      std::count_if(nodes.begin(), nodes.end(), [](const Node& n) { return is_infrastructure(n.role); }));
}

bool MetricCoefficients::valid() const {
  const bool finite = std::isfinite(w_latency) && std::isfinite(w_load) && std::isfinite(w_reliability);
  return finite && w_latency >= 0 && w_load >= 0 && w_reliability >= 0 && sum() > 0;
}

MetricCoefficients MetricCoefficients::normalized() const {
  const double s = sum();
  return {w_latency / s, w_load / s, w_reliability / s};
}

std::vector<Violation> check_link_attributes(const Link& link) {
  std::vector<Violation> out;
  const auto& a = link.attrs;
  const auto where = "link " + link.id() + ": ";
  if (!(std::isfinite(a.latency_ms) && a.latency_ms >= 0)) {
    out.push_back({violation::kAttrRange, where + "latency_ms must be non-negative"});
  }
  if (!(std::isfinite(a.bandwidth_mbps) && a.bandwidth_mbps > 0)) {
    out.push_back({violation::kAttrRange, where + "bandwidth_mbps must be positive"});
  }
  if (!(a.load >= 0 && a.load <= 1)) {
    out.push_back({violation::kAttrRange, where + "load must lie in [0,1]"});
  }
  if (!(a.reliability > 0 && a.reliability <= 1)) {
    out.push_back({violation::kAttrRange, where + "reliability must lie in (0,1]"});
  }
  return out;
}

ValidationOutcome validate_topology_spec(const TopologySpec& spec) {
  ValidationOutcome out;
  auto add = [&](const char* code, std::string msg) { out.violations.push_back({code, std::move(msg)}); };

  if (spec.nodes.empty()) {
    add(violation::kEmptyTopology, "topology has no nodes");
    out.passed = false;
    return out;
  }

  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < spec.nodes.size(); ++i) {
    if (!index.emplace(spec.nodes[i].node_id, i).second) {
      add(violation::kDuplicateNode, "node id '" + spec.nodes[i].node_id + "' appears more than once");
    }
  }

  const std::size_t n = spec.nodes.size();
  std::vector<std::vector<std::size_t>> adj(n);
  std::set<std::string> seen_links;
  for (const auto& link : spec.links) {
    const auto ia = index.find(link.endpoint_a);
    const auto ib = index.find(link.endpoint_b);
    bool usable = true;
    if (ia == index.end()) {
      add(violation::kUnknownEndpoint, "link " + link.id() + " references unknown node '" + link.endpoint_a + "'");
      usable = false;
    }
    if (ib == index.end()) {
      add(violation::kUnknownEndpoint, "link " + link.id() + " references unknown node '" + link.endpoint_b + "'");
      usable = false;
    }
    if (link.endpoint_a == link.endpoint_b) {
      add(violation::kSelfLoop, "link " + link.id() + " is a self-loop");
      usable = false;
    }
    if (!seen_links.insert(link.id()).second) {
      add(violation::kDuplicateLink, "link " + link.id() + " appears more than once");
      usable = false;
    }
    for (auto& v : check_link_attributes(link)) out.violations.push_back(std::move(v));
    if (usable) {
      adj[ia->second].push_back(ib->second);
      adj[ib->second].push_back(ia->second);
    }
  }

  // Hosts hang off exactly one infrastructure node.
  for (std::size_t i = 0; i < n; ++i) {
    const auto& node = spec.nodes[i];
    if (node.role != NodeRole::kHost) continue;
    if (adj[i].size() != 1) {
      add(violation::kHostAttachment, "host '" + node.node_id + "' must have exactly one access link, has " +
                                          std::to_string(adj[i].size()));
    } else if (!is_infrastructure(spec.nodes[adj[i][0]].role)) {
      add(violation::kHostAttachment, "host '" + node.node_id + "' must attach to a switch or router");
    }
  }

  {
    std::vector<bool> reached(n, false);
    std::queue<std::size_t> q;
    q.push(0);
    reached[0] = true;
    std::size_t count = 1;
    while (!q.empty()) {
      const auto u = q.front();
      q.pop();
      for (auto v : adj[u]) {
        if (!reached[v]) {
          reached[v] = true;
          ++count;
          q.push(v);
        }
      }
    }
    if (count != n) {
      add(violation::kDisconnected,
          "only " + std::to_string(count) + " of " + std::to_string(n) + " nodes are reachable");
    }
  }

  // Kind conformance over the infrastructure fabric.
  std::size_t infra_n = 0;
  std::size_t infra_links = 0;
  std::vector<std::size_t> infra_degree(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    if (!is_infrastructure(spec.nodes[i].role)) continue;
    ++infra_n;
    for (auto j : adj[i]) {
      if (is_infrastructure(spec.nodes[j].role)) ++infra_degree[i];
    }
  }
  for (std::size_t i = 0; i < n; ++i) infra_links += infra_degree[i];
  infra_links /= 2;

  const std::size_t full = infra_n * (infra_n - (infra_n > 0 ? 1 : 0)) / 2;
  const auto counts = " (" + std::to_string(infra_n) + " infrastructure nodes, " + std::to_string(infra_links) +
                      " links)";
  switch (spec.kind) {
    case TopologyKind::kFullMesh:
      if (infra_links != full) {
        add(violation::kKindConformance,
            "full mesh needs n(n-1)/2 = " + std::to_string(full) + " links" + counts);
      }
      break;
    case TopologyKind::kHubAndSpoke: {
      bool ok = infra_n >= 2 && infra_links == infra_n - 1;
      if (ok) {
        std::size_t hubs = 0;
        std::size_t spokes = 0;
        for (std::size_t i = 0; i < n; ++i) {
          if (!is_infrastructure(spec.nodes[i].role)) continue;
          if (infra_degree[i] == infra_n - 1) ++hubs;
          if (infra_degree[i] == 1) ++spokes;
        }
        // With two nodes both endpoints have degree n-1 = 1.
        ok = infra_n == 2 ? (hubs == 2) : (hubs == 1 && spokes == infra_n - 1);
      }
      if (!ok) {
        add(violation::kKindConformance,
            "hub-and-spoke needs one hub of degree n-1 and spokes of degree 1" + counts);
      }
      break;
    }
    case TopologyKind::kPartialMesh:
      if (!(infra_n >= 1 && infra_links > infra_n - 1 && infra_links < full)) {
        add(violation::kKindConformance,
            "partial mesh needs strictly between n-1 and n(n-1)/2 links" + counts);
      }
      break;
  }

  out.passed = out.violations.empty();
  return out;
}

ValidationOutcome validate_weighted_topology(const WeightedTopology& wt) {
  ValidationOutcome out = validate_topology_spec(wt.spec);
  std::set<std::string> ids;
  for (const auto& link : wt.spec.links) {
    ids.insert(link.id());
    const auto it = wt.weights.find(link.id());
    if (it == wt.weights.end()) {
      out.violations.push_back({violation::kWeightMissing, "link " + link.id() + " has no weight"});
    } else if (!(std::isfinite(it->second) && it->second > 0)) {
      out.violations.push_back({violation::kWeightInvalid, "link " + link.id() + " weight must be positive and finite"});
    }
  }
  for (const auto& [id, w] : wt.weights) {
    if (!ids.count(id)) {
      out.violations.push_back({violation::kWeightInvalid, "weight for unknown link " + id});
    }
  }
  out.passed = out.violations.empty();
  return out;
}

std::string utc_now_iso() {
  using namespace std::chrono;
  const auto now = system_clock::now();
  const auto t = system_clock::to_time_t(now);
  const auto ms = duration_cast<milliseconds>(now.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[40];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900, tm.tm_mon + 1,
                tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec, static_cast<int>(ms));
  return buf;
}

// ---- JSON -----------------------------------------------------------------

void to_json(json& j, ServiceType v) { j = to_string(v); }
void from_json(const json& j, ServiceType& v) { v = enum_from_json(j, &parse_service_type, "service_type"); }
void to_json(json& j, TopologyKind v) { j = to_string(v); }
void from_json(const json& j, TopologyKind& v) { v = enum_from_json(j, &parse_topology_kind, "topology kind"); }

void to_json(json& j, const Intent& v) {
  j = json{{"intent_id", v.intent_id}, {"raw_text", v.raw_text}, {"submitted_at", v.submitted_at},
           {"source", v.source}};
}

void from_json(const json& j, Intent& v) {
  j.at("intent_id").get_to(v.intent_id);
  j.at("raw_text").get_to(v.raw_text);
  v.submitted_at = j.value("submitted_at", "");
  v.source = j.value("source", "");
}

void to_json(json& j, const LinkAttributes& v) {
  j = json{{"latency_ms", v.latency_ms}, {"bandwidth_mbps", v.bandwidth_mbps}, {"load", v.load},
           {"reliability", v.reliability}};
}

void from_json(const json& j, LinkAttributes& v) {
  j.at("latency_ms").get_to(v.latency_ms);
  j.at("bandwidth_mbps").get_to(v.bandwidth_mbps);
  j.at("load").get_to(v.load);
  j.at("reliability").get_to(v.reliability);
}

void to_json(json& j, const Node& v) {
  j = json{{"node_id", v.node_id}, {"role", to_string(v.role)}, {"domain_id", v.domain_id}};
}

void from_json(const json& j, Node& v) {
  j.at("node_id").get_to(v.node_id);
  v.role = enum_from_json(j.at("role"), &parse_node_role, "node role");
  v.domain_id = j.value("domain_id", "d0");
}

void to_json(json& j, const Link& v) {
  j = json{{"endpoint_a", v.endpoint_a}, {"endpoint_b", v.endpoint_b}, {"attrs", v.attrs}};
}

void from_json(const json& j, Link& v) {
  j.at("endpoint_a").get_to(v.endpoint_a);
  j.at("endpoint_b").get_to(v.endpoint_b);
  j.at("attrs").get_to(v.attrs);
}

void to_json(json& j, const TopologySpec& v) {
  j = json{{"kind", v.kind}, {"nodes", v.nodes}, {"links", v.links}};
}

void from_json(const json& j, TopologySpec& v) {
  j.at("kind").get_to(v.kind);
  j.at("nodes").get_to(v.nodes);
  j.at("links").get_to(v.links);
}

void to_json(json& j, const JuniorProposal& v) {
  j = json{{"agent_id", v.agent_id},
           {"intent_id", v.intent_id},
           {"service_type", v.service_type},
           {"topology", v.topology},
           {"service_config", v.service_config},
           {"model_raw_output", v.model_raw_output}};
}

void from_json(const json& j, JuniorProposal& v) {
  j.at("agent_id").get_to(v.agent_id);
  j.at("intent_id").get_to(v.intent_id);
  j.at("service_type").get_to(v.service_type);
  j.at("topology").get_to(v.topology);
  v.service_config = j.value("service_config", json::object());
  if (v.service_config.is_null()) throw Error(errc::kBadRequest, "service_config must not be null");
  v.model_raw_output = j.value("model_raw_output", "");
}

void to_json(json& j, const WeightedTopology& v) {
  j = json{{"spec", v.spec}, {"weights", v.weights}};
}

void from_json(const json& j, WeightedTopology& v) {
  j.at("spec").get_to(v.spec);
  v.weights = j.at("weights").get<std::map<std::string, double>>();
}

void to_json(json& j, const Violation& v) { j = json{{"code", v.code}, {"message", v.message}}; }

void from_json(const json& j, Violation& v) {
  j.at("code").get_to(v.code);
  v.message = j.value("message", "");
}

void to_json(json& j, const ValidationOutcome& v) {
  j = json{{"passed", v.passed}, {"violations", v.violations}};
}

void to_json(json& j, const ValidationReport& v) {
  j = json{{"attempt", v.attempt}, {"passed", v.passed}, {"violations", v.violations},
           {"timestamp", v.timestamp}};
}

void from_json(const json& j, ValidationReport& v) {
  j.at("attempt").get_to(v.attempt);
  j.at("passed").get_to(v.passed);
  j.at("violations").get_to(v.violations);
  v.timestamp = j.value("timestamp", "");
}

void to_json(json& j, const MetricCoefficients& v) {
  j = json{{"w_latency", v.w_latency}, {"w_load", v.w_load}, {"w_reliability", v.w_reliability}};
}

void from_json(const json& j, MetricCoefficients& v) {
  j.at("w_latency").get_to(v.w_latency);
  j.at("w_load").get_to(v.w_load);
  j.at("w_reliability").get_to(v.w_reliability);
  if (!v.valid()) throw Error(errc::kBadRequest, "metric coefficients must be non-negative and not all zero");
}

void to_json(json& j, const RoutingDecision& v) {
  j = json{{"strategy", to_string(v.strategy)},
           {"metric", to_string(v.metric)},
           {"metric_coefficients", v.coefficients},
           {"rationale", v.rationale}};
}

void from_json(const json& j, RoutingDecision& v) {
  v.strategy = enum_from_json(j.at("strategy"), &parse_routing_strategy, "routing strategy");
  v.metric = j.value("metric", "COMPOSITE") == "HOP_COUNT" ? MetricMode::kHopCount : MetricMode::kComposite;
  j.at("metric_coefficients").get_to(v.coefficients);
  v.rationale = j.value("rationale", "");
}

}  // namespace ibn

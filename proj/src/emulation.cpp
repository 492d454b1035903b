#include "ibn/emulation.hpp"

#include <algorithm>
#include <queue>

#include "ibn/error.hpp"

namespace ibn::emulation {

FaultPlan FaultPlan::for_attempt(int attempt) const {
  if (!applies_to(attempt)) return {};
  FaultPlan p = *this;
  p.fail_attempts.reset();
  return p;
}

void to_json(json& j, const FaultPlan& v) {
  j = json{{"fail_instruction", v.fail_instruction ? json(*v.fail_instruction) : json(nullptr)},
           {"links_down", v.links_down}};
  if (v.fail_attempts) j["fail_attempts"] = *v.fail_attempts;
}

void from_json(const json& j, FaultPlan& v) {
  v = {};
  if (j.contains("fail_instruction") && !j["fail_instruction"].is_null()) {
    v.fail_instruction = j["fail_instruction"].get<std::size_t>();
  }
  v.links_down = j.value("links_down", std::vector<std::string>{});
  if (j.contains("fail_attempts") && !j["fail_attempts"].is_null()) {
    v.fail_attempts = j["fail_attempts"].get<std::set<int>>();
  }
}

std::vector<std::string> EmulationHandle::links_down() const {
  std::vector<std::string> out;
  for (const auto& [id, l] : links_) {
    if (!l.up) out.push_back(id);
  }
  return out;
}

void EmulationHandle::set_link_state(const std::string& id, bool up) {
  const auto it = links_.find(id);
  if (it == links_.end()) throw Error(errc::kUnknownNode, "no link '" + id + "'", {{"link_id", id}});
  it->second.up = up;
}

WeightedTopology EmulationHandle::to_weighted_topology() const {
  WeightedTopology wt;
  wt.spec.kind = kind_;
  for (const auto& [id, n] : nodes_) wt.spec.nodes.push_back(n);
  for (const auto& [id, l] : links_) {
    wt.spec.links.push_back({l.endpoint_a, l.endpoint_b, l.attrs});
    wt.weights[id] = l.weight;
  }
  return wt;
}

namespace {

[[noreturn]] void fail(std::size_t index, const std::string& reason, bool injected) {
  throw Error(errc::kInstantiationFailed, "instruction " + std::to_string(index) + ": " + reason,
              {{"failed_instruction_index", index}, {"reason", reason}, {"injected", injected}});
}

}  // namespace

EmulationHandle instantiate(const DeploymentDocument& doc, const FaultPlan& faults) {
  EmulationHandle h;
  h.kind_ = doc.topology.spec.kind;
  for (std::size_t i = 0; i < doc.instructions.size(); ++i) {
    if (faults.fail_instruction && *faults.fail_instruction == i) fail(i, "injected failure", true);
    const auto& ins = doc.instructions[i];
    try {
      switch (ins.action) {
        case InstructionAction::kCreateNode: {
          Node n;
          n.node_id = ins.args.at("node_id").get<std::string>();
          const auto role = parse_node_role(ins.args.at("role").get<std::string>());
          if (!role) fail(i, "unknown role", false);
          n.role = *role;
          n.domain_id = ins.args.value("domain_id", std::string("d0"));
          if (!h.nodes_.emplace(n.node_id, n).second) fail(i, "node '" + n.node_id + "' already exists", false);
          break;
        }
        case InstructionAction::kCreateLink: {
          EmulatedLink l;
          l.endpoint_a = ins.args.at("endpoint_a").get<std::string>();
          l.endpoint_b = ins.args.at("endpoint_b").get<std::string>();
          l.attrs = ins.args.at("attrs").get<LinkAttributes>();
          if (h.nodes_.count(l.endpoint_a) == 0 || h.nodes_.count(l.endpoint_b) == 0) {
            fail(i, "link " + link_id(l.endpoint_a, l.endpoint_b) + " references a missing node", false);
          }
          if (l.endpoint_a == l.endpoint_b) fail(i, "self loop at '" + l.endpoint_a + "'", false);
          const auto id = link_id(l.endpoint_a, l.endpoint_b);
          if (!h.links_.emplace(id, l).second) fail(i, "link " + id + " already exists", false);
          break;
        }
        case InstructionAction::kSetWeight: {
          const auto id = ins.args.at("link_id").get<std::string>();
          const auto it = h.links_.find(id);
          if (it == h.links_.end()) fail(i, "weight for unknown link " + id, false);
          it->second.weight = ins.args.at("weight").get<double>();
          break;
        }
      }
    } catch (const json::exception& e) {
      fail(i, std::string("malformed arguments: ") + e.what(), false);
    } catch (const Error& e) {
      if (e.code() == errc::kInstantiationFailed) throw;
      fail(i, e.what(), false);
    }
  }
  for (const auto& id : faults.links_down) {
    if (const auto it = h.links_.find(id); it != h.links_.end()) it->second.up = false;
  }
  return h;
}

ReachabilityReport check_reachability(const EmulationHandle& handle) {
  std::map<std::string, std::vector<std::string>> adj;
  for (const auto& [id, n] : handle.nodes()) adj[id];
  for (const auto& [id, l] : handle.links()) {
    if (!l.up) continue;
    adj[l.endpoint_a].push_back(l.endpoint_b);
    adj[l.endpoint_b].push_back(l.endpoint_a);
  }
  // Component labels; pairs in different components are unreachable.
  std::map<std::string, int> comp;
  int next = 0;
  for (const auto& [start, _] : adj) {
    if (comp.count(start) != 0) continue;
    std::queue<std::string> q;
    q.push(start);
    comp[start] = next;
    while (!q.empty()) {
      const auto u = q.front();
      q.pop();
      for (const auto& v : adj[u]) {
        if (comp.emplace(v, next).second) q.push(v);
      }
    }
    ++next;
  }

  ReachabilityReport r;
  r.links_down = handle.links_down();
  for (const auto& [a, ca] : comp) {
    for (const auto& [b, cb] : comp) {
      if (a != b && ca != cb) r.unreachable_pairs.emplace_back(a, b);
    }
  }
  r.all_pairs_connected = r.unreachable_pairs.empty();
  return r;
}

bool same_graph(const WeightedTopology& a, const WeightedTopology& b) {
  if (a.spec.kind != b.spec.kind) return false;
  auto nodes_a = a.spec.nodes;
  auto nodes_b = b.spec.nodes;
  auto by_id = [](const Node& x, const Node& y) { return x.node_id < y.node_id; };
  std::sort(nodes_a.begin(), nodes_a.end(), by_id);
  std::sort(nodes_b.begin(), nodes_b.end(), by_id);
  if (nodes_a != nodes_b) return false;

  auto links = [](const TopologySpec& s) {
    std::map<std::string, LinkAttributes> m;
    for (const auto& l : s.links) m[l.id()] = l.attrs;
    return m;
  };
  const auto la = links(a.spec);
  const auto lb = links(b.spec);
  return la.size() == a.spec.links.size() && lb.size() == b.spec.links.size() && la == lb && a.weights == b.weights;
}

void to_json(json& j, const ReachabilityReport& v) {
  json pairs = json::array();
  for (const auto& [a, b] : v.unreachable_pairs) pairs.push_back({a, b});
  j = json{{"all_pairs_connected", v.all_pairs_connected}, {"unreachable_pairs", pairs}, {"links_down", v.links_down}};
}

}  // namespace ibn::emulation

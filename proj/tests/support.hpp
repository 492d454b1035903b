// Test-side oracles and fixtures. Nothing here calls into the code under
// test for the quantity being checked.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "ibn/a2a.hpp"
#include "ibn/config.hpp"
#include "ibn/domain.hpp"
#include "ibn/junior_agent.hpp"
#include "ibn/mcp_state.hpp"
#include "ibn/orchestrator.hpp"
#include "ibn/policy_agent.hpp"
#include "ibn/rng.hpp"
#include "ibn/senior_agent.hpp"

namespace oracle {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Undirected weighted graph as an adjacency matrix; kInf means no edge.
struct Matrix {
  std::vector<std::string> ids;
  std::vector<std::vector<double>> w;

  std::size_t size() const { return ids.size(); }
  std::size_t at(const std::string& id) const {
    return static_cast<std::size_t>(std::find(ids.begin(), ids.end(), id) - ids.begin());
  }
};

// Minimum cost over every simple path from s to t by exhaustive DFS.
inline double simple_path_min(const Matrix& m, std::size_t s, std::size_t t) {
  if (s == t) return 0.0;
  double best = kInf;
  std::vector<bool> seen(m.size(), false);
  std::function<void(std::size_t, double)> dfs = [&](std::size_t u, double acc) {
    if (u == t) {
      best = std::min(best, acc);
      return;
    }
    seen[u] = true;
    for (std::size_t v = 0; v < m.size(); ++v) {
      if (!seen[v] && m.w[u][v] < kInf) dfs(v, acc + m.w[u][v]);
    }
    seen[u] = false;
  };
  dfs(s, 0.0);
  return best;
}

// Random connected graph on n nodes with integer edge costs in [1, 9]:
// a random spanning tree plus extra edges with probability p.
inline Matrix random_connected(ibn::Rng& rng, std::size_t n, double p) {
  Matrix m;
  for (std::size_t i = 0; i < n; ++i) m.ids.push_back("r" + std::to_string(i));
  m.w.assign(n, std::vector<double>(n, kInf));
  auto link = [&](std::size_t a, std::size_t b) {
    const double c = 1.0 + static_cast<double>(rng.below(9));
    m.w[a][b] = m.w[b][a] = c;
  };
  for (std::size_t i = 1; i < n; ++i) link(i, rng.below(i));
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      if (m.w[a][b] == kInf && rng.unit() < p) link(a, b);
    }
  }
  return m;
}

// Links whose latency carries the cost; with coefficients (1, 0, 0) the
// composite metric is exactly the latency.
inline ibn::TopologySpec to_spec(const Matrix& m, ibn::NodeRole role = ibn::NodeRole::kRouter,
                                 const std::string& domain = "d0") {
  ibn::TopologySpec spec;
  spec.kind = ibn::TopologyKind::kPartialMesh;
  for (const auto& id : m.ids) spec.nodes.push_back({id, role, domain});
  for (std::size_t a = 0; a < m.size(); ++a) {
    for (std::size_t b = a + 1; b < m.size(); ++b) {
      if (m.w[a][b] < kInf) spec.links.push_back({m.ids[a], m.ids[b], {m.w[a][b], 1000.0, 0.0, 1.0}});
    }
  }
  return spec;
}

inline bool connected(const Matrix& m) {
  std::vector<bool> seen(m.size(), false);
  std::vector<std::size_t> stack{0};
  seen[0] = true;
  while (!stack.empty()) {
    const auto u = stack.back();
    stack.pop_back();
    for (std::size_t v = 0; v < m.size(); ++v) {
      if (!seen[v] && m.w[u][v] < kInf) {
        seen[v] = true;
        stack.push_back(v);
      }
    }
  }
  return std::all_of(seen.begin(), seen.end(), [](bool b) { return b; });
}

// Connectivity of a spec by union-find over its links.
inline bool spec_connected(const ibn::TopologySpec& spec) {
  std::map<std::string, std::string> parent;
  for (const auto& n : spec.nodes) parent[n.node_id] = n.node_id;
  std::function<std::string(const std::string&)> root = [&](const std::string& x) {
    return parent[x] == x ? x : parent[x] = root(parent[x]);
  };
  for (const auto& l : spec.links) parent[root(l.endpoint_a)] = root(l.endpoint_b);
  std::set<std::string> roots;
  for (const auto& n : spec.nodes) roots.insert(root(n.node_id));
  return roots.size() <= 1;
}

// Longest common subsequence by enumerating every subsequence of `a`.
inline std::size_t lcs_brute(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::size_t best = 0;
  const std::size_t n = a.size();
  for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
    std::size_t k = 0;
    std::size_t len = 0;
    bool ok = true;
    for (std::size_t i = 0; i < n && ok; ++i) {
      if ((mask >> i & 1) == 0) continue;
      while (k < b.size() && b[k] != a[i]) ++k;
      if (k == b.size()) ok = false;
      ++k;
      ++len;
    }
    if (ok) best = std::max(best, len);
  }
  return best;
}

// Exact-match METEOR by enumerating every one-to-one alignment of equal
// tokens: the largest M, then the fewest chunks among those.
struct MeteorOracle {
  std::size_t m = 0;
  std::size_t c = 0;
  double score = 0.0;
};

inline MeteorOracle meteor_brute(const std::vector<std::string>& cand, const std::vector<std::string>& ref) {
  std::size_t best_m = 0;
  std::size_t best_c = 0;
  std::vector<int> map(cand.size(), -1);
  std::vector<bool> used(ref.size(), false);
  std::function<void(std::size_t)> rec = [&](std::size_t i) {
    if (i == cand.size()) {
      std::size_t m = 0;
      std::size_t c = 0;
      int prev = -2;
      for (std::size_t k = 0; k < cand.size(); ++k) {
        if (map[k] < 0) {
          prev = -2;
          continue;
        }
        ++m;
        if (prev < 0 || map[k] != prev + 1) ++c;
        prev = map[k];
      }
      if (m > best_m || (m == best_m && c < best_c)) {
        best_m = m;
        best_c = c;
      }
      return;
    }
    rec(i + 1);
    for (std::size_t j = 0; j < ref.size(); ++j) {
      if (!used[j] && ref[j] == cand[i]) {
        used[j] = true;
        map[i] = static_cast<int>(j);
        rec(i + 1);
        map[i] = -1;
        used[j] = false;
      }
    }
  };
  rec(0);
  MeteorOracle o{best_m, best_c, 0.0};
  if (best_m == 0) return o;
  const double p = static_cast<double>(best_m) / cand.size();
  const double r = static_cast<double>(best_m) / ref.size();
  const double f = 10 * p * r / (r + 9 * p);
  const double frag = static_cast<double>(best_c) / best_m;
  o.score = f * (1 - 0.5 * frag * frag * frag);
  return o;
}

// Graph isomorphism between two weighted topologies by trying every
// role-preserving bijection of node ids. Edges must agree on attributes and
// weight.
inline bool isomorphic(const ibn::WeightedTopology& a, const ibn::WeightedTopology& b) {
  if (a.spec.nodes.size() != b.spec.nodes.size() || a.spec.links.size() != b.spec.links.size()) return false;
  const auto n = a.spec.nodes.size();
  struct E {
    ibn::LinkAttributes attrs;
    double w;
  };
  auto table = [](const ibn::WeightedTopology& t) {
    std::map<std::pair<std::size_t, std::size_t>, E> out;
    std::map<std::string, std::size_t> idx;
    for (std::size_t i = 0; i < t.spec.nodes.size(); ++i) idx[t.spec.nodes[i].node_id] = i;
    for (const auto& l : t.spec.links) {
      auto x = idx.at(l.endpoint_a);
      auto y = idx.at(l.endpoint_b);
      if (x > y) std::swap(x, y);
      const auto it = t.weights.find(l.id());
      out[{x, y}] = {l.attrs, it == t.weights.end() ? std::nan("") : it->second};
    }
    return out;
  };
  const auto ea = table(a);
  const auto eb = table(b);
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  do {
    bool ok = true;
    for (std::size_t i = 0; i < n && ok; ++i) ok = a.spec.nodes[i].role == b.spec.nodes[perm[i]].role;
    for (auto it = ea.begin(); ok && it != ea.end(); ++it) {
      auto x = perm[it->first.first];
      auto y = perm[it->first.second];
      if (x > y) std::swap(x, y);
      const auto jt = eb.find({x, y});
      ok = jt != eb.end() && jt->second.attrs == it->second.attrs && jt->second.w == it->second.w;
    }
    if (ok) return true;
  } while (std::next_permutation(perm.begin(), perm.end()));
  return false;
}

}  // namespace oracle

namespace fixture {

// A hand-wired in-process fleet where each junior may have its own rule
// table, for tests that need the two proposals to differ.
struct Assembly {
  std::shared_ptr<ibn::a2a::MessageLog> log = std::make_shared<ibn::a2a::MessageLog>();
  std::shared_ptr<ibn::mcp::StateStore> store = std::make_shared<ibn::mcp::StateStore>();
  std::shared_ptr<ibn::SeniorAgent> senior;
  std::shared_ptr<ibn::Orchestrator> orchestrator;
};

inline std::shared_ptr<ibn::ModelGateway> mock_gateway(const nlohmann::json& rules, std::uint64_t seed = 42) {
  return std::make_shared<ibn::ModelGateway>(std::make_shared<ibn::MockBackend>(rules, seed));
}

inline Assembly assemble(const nlohmann::json& junior1_rules, const nlohmann::json& junior2_rules,
                         ibn::OrchestratorSettings settings = {}) {
  namespace role = ibn::a2a::role;
  Assembly a;
  const auto& rules = ibn::MockBackend::default_rules();
  auto j1 = std::make_shared<ibn::JuniorAgent>(role::kJunior1, mock_gateway(junior1_rules), ibn::JuniorSettings{});
  auto j2 = std::make_shared<ibn::JuniorAgent>(role::kJunior2, mock_gateway(junior2_rules), ibn::JuniorSettings{});
  a.senior = std::make_shared<ibn::SeniorAgent>(mock_gateway(rules), ibn::SeniorSettings{});
  auto state = std::make_shared<ibn::mcp::LocalMcpClient>(a.store);
  auto policy = std::make_shared<ibn::PolicyAgent>(mock_gateway(rules), state, ibn::PolicySettings{});
  auto t = std::make_shared<ibn::a2a::InProcessTransport>();
  t->bind(role::kJunior1, [j1](const ibn::a2a::Envelope& e) { return j1->handle(e); });
  t->bind(role::kJunior2, [j2](const ibn::a2a::Envelope& e) { return j2->handle(e); });
  t->bind(role::kSenior, [s = a.senior](const ibn::a2a::Envelope& e) { return s->handle(e); });
  t->bind(role::kPolicy, [policy](const ibn::a2a::Envelope& e) { return policy->handle(e); });
  t->bind(role::kMcpState, [s = a.store](const ibn::a2a::Envelope& e) { return s->handle(e); });
  auto client = std::make_shared<ibn::a2a::Client>(ibn::a2a::AgentRegistry::defaults(), t, a.log);
  a.orchestrator = std::make_shared<ibn::Orchestrator>(client, state, settings);
  return a;
}

// The built-in rule table with one junior rule's answer replaced.
inline nlohmann::json rules_with(const std::string& rule_name, const std::string& field, const nlohmann::json& value) {
  auto rules = ibn::MockBackend::default_rules();
  for (auto& r : rules["rules"]) {
    if (r.value("name", std::string{}) == rule_name) r["response"][field] = value;
  }
  return rules;
}

// The built-in rule table with every rule delayed by `ms`.
inline nlohmann::json rules_delayed(double ms) {
  auto rules = ibn::MockBackend::default_rules();
  for (auto& r : rules["rules"]) r["delay_ms"] = ms;
  return rules;
}

}  // namespace fixture

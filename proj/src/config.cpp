#include "ibn/config.hpp"

#include <fstream>
#include <set>

#include "ibn/error.hpp"

namespace ibn {

namespace {

[[noreturn]] void invalid(const std::string& msg) { throw Error(errc::kConfigInvalid, msg); }

void only_keys(const json& j, const std::string& where, std::initializer_list<const char*> keys) {
  if (!j.is_object()) invalid(where + " must be an object");
  const std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& [k, v] : j.items()) {
    if (allowed.count(k) == 0) invalid("unknown key '" + k + "' in " + where);
  }
}

template <class T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key) && !j[key].is_null()) out = j[key].get<T>();
}

ServiceType service_key(const std::string& k) {
  const auto s = parse_service_type(k);
  if (!s) invalid("unknown service type '" + k + "'");
  return *s;
}

TopologyKind kind_key(const std::string& k) {
  const auto s = parse_topology_kind(k);
  if (!s) invalid("unknown topology kind '" + k + "'");
  return *s;
}

ModelEndpoint endpoint_from(const json& j, ModelEndpoint base) {
  only_keys(j, "endpoint", {"base_url", "model_name", "timeout_ms", "max_retries_on_parse"});
  read(j, "base_url", base.base_url);
  read(j, "model_name", base.model_name);
  read(j, "timeout_ms", base.timeout_ms);
  read(j, "max_retries_on_parse", base.max_retries_on_parse);
  return base;
}

json endpoint_to(const ModelEndpoint& e) {
  return {{"base_url", e.base_url},
          {"model_name", e.model_name},
          {"timeout_ms", e.timeout_ms},
          {"max_retries_on_parse", e.max_retries_on_parse}};
}

}  // namespace

const ModelEndpoint& SystemConfig::endpoint_for(const std::string& role) const {
  const auto it = endpoints.find(role);
  return it == endpoints.end() ? default_endpoint : it->second;
}

json SystemConfig::rules() const {
  if (!mock_rules.is_null() && !mock_rules.empty()) return mock_rules;
  return MockBackend::default_rules();
}

SystemConfig config_from_json(const json& j) {
  SystemConfig c;
  try {
    only_keys(j, "config",
              {"registry", "backend", "mock_rules", "mock_rules_path", "endpoints", "seed", "retries",
               "phase2_full_restart", "pseudo_edge_cost", "coordination_delay_ms", "junior", "senior", "policy",
               "log_path", "audit_path", "state_journal_path", "fault_plan"});
    if (j.contains("registry")) c.registry = a2a::AgentRegistry::from_json(j["registry"]);
    read(j, "backend", c.backend);
    if (c.backend != "mock" && c.backend != "remote") invalid("backend must be 'mock' or 'remote'");
    read(j, "mock_rules", c.mock_rules);
    read(j, "mock_rules_path", c.mock_rules_path);
    if (!c.mock_rules_path.empty()) {
      std::ifstream in(c.mock_rules_path);
      if (!in) invalid("cannot open mock rule table " + c.mock_rules_path);
      c.mock_rules = json::parse(in);
    }

    if (j.contains("endpoints")) {
      const auto& eps = j["endpoints"];
      if (!eps.is_object()) invalid("endpoints must be an object");
      if (eps.contains("default")) c.default_endpoint = endpoint_from(eps["default"], c.default_endpoint);
      for (const auto& [role, e] : eps.items()) {
        if (role != "default") c.endpoints[role] = endpoint_from(e, c.default_endpoint);
      }
    }

    read(j, "seed", c.seed);
    c.junior.seed = c.seed;
    c.orchestrator.seed = c.seed;

    if (j.contains("retries")) {
      const auto& r = j["retries"];
      only_keys(r, "retries", {"phase1_max_attempts", "phase2_max_attempts", "max_retries_on_parse"});
      read(r, "phase1_max_attempts", c.orchestrator.phase1_max_attempts);
      read(r, "phase2_max_attempts", c.orchestrator.phase2_max_attempts);
      int parse = c.junior.max_retries_on_parse;
      read(r, "max_retries_on_parse", parse);
      c.junior.max_retries_on_parse = parse;
      c.senior.max_retries_on_parse = parse;
    }
    read(j, "phase2_full_restart", c.orchestrator.phase2_full_restart);
    read(j, "pseudo_edge_cost", c.orchestrator.pseudo_edge_cost);
    read(j, "coordination_delay_ms", c.orchestrator.coordination_delay_ms);

    if (j.contains("junior")) {
      const auto& jr = j["junior"];
      only_keys(jr, "junior", {"default_node_count", "max_node_count"});
      read(jr, "default_node_count", c.junior.default_node_count);
      read(jr, "max_node_count", c.junior.max_node_count);
    }

    if (j.contains("senior")) {
      const auto& s = j["senior"];
      only_keys(s, "senior", {"compatibility", "min_compatibility", "weight_profiles", "weight_floor", "qos_bounds"});
      if (s.contains("compatibility")) {
        for (const auto& [svc, row] : s["compatibility"].items()) {
          auto& dst = c.senior.compatibility[service_key(svc)];
          for (const auto& [kind, score] : row.items()) dst[kind_key(kind)] = score.get<int>();
        }
      }
      read(s, "min_compatibility", c.senior.min_compatibility);
      if (s.contains("weight_profiles")) {
        for (const auto& [svc, w] : s["weight_profiles"].items()) {
          only_keys(w, "weight profile", {"w_latency", "w_bandwidth", "w_load", "w_reliability"});
          auto& dst = c.senior.weight_profiles[service_key(svc)];
          read(w, "w_latency", dst.w_latency);
          read(w, "w_bandwidth", dst.w_bandwidth);
          read(w, "w_load", dst.w_load);
          read(w, "w_reliability", dst.w_reliability);
        }
      }
      read(s, "weight_floor", c.senior.weight_floor);
      if (s.contains("qos_bounds")) {
        for (const auto& [svc, b] : s["qos_bounds"].items()) {
          only_keys(b, "qos bounds", {"max_latency_ms", "min_bandwidth_mbps", "min_reliability"});
          auto& dst = c.senior.qos_bounds[service_key(svc)];
          read(b, "max_latency_ms", dst.max_latency_ms);
          read(b, "min_bandwidth_mbps", dst.min_bandwidth_mbps);
          read(b, "min_reliability", dst.min_reliability);
        }
      }
    }

    if (j.contains("policy")) {
      const auto& p = j["policy"];
      only_keys(p, "policy", {"profiles", "load_threshold", "load_bump"});
      if (p.contains("profiles")) {
        for (const auto& [svc, prof] : p["profiles"].items()) {
          only_keys(prof, "policy profile", {"strategy", "metric", "metric_coefficients"});
          auto& dst = c.policy.profiles[service_key(svc)];
          if (prof.contains("strategy")) {
            const auto s = parse_routing_strategy(prof["strategy"].get<std::string>());
            if (!s) invalid("unknown routing strategy in policy profile");
            dst.strategy = *s;
          }
          if (prof.contains("metric")) {
            const auto m = prof["metric"].get<std::string>();
            if (m == "COMPOSITE") {
              dst.metric = MetricMode::kComposite;
            } else if (m == "HOP_COUNT") {
              dst.metric = MetricMode::kHopCount;
            } else {
              invalid("metric must be COMPOSITE or HOP_COUNT");
            }
          }
          if (prof.contains("metric_coefficients")) dst.coefficients = prof["metric_coefficients"].get<MetricCoefficients>();
        }
      }
      read(p, "load_threshold", c.policy.load_threshold);
      read(p, "load_bump", c.policy.load_bump);
    }

    read(j, "log_path", c.log_path);
    read(j, "audit_path", c.audit_path);
    read(j, "state_journal_path", c.state_journal_path);
    if (j.contains("fault_plan") && !j["fault_plan"].is_null()) c.fault_plan = j["fault_plan"].get<emulation::FaultPlan>();
  } catch (const Error& e) {
    if (e.code() == errc::kConfigInvalid || e.code() == errc::kPortInUse) throw;
    invalid(e.what());
  } catch (const json::exception& e) {
    invalid(e.what());
  }

  c.registry.check();
  if (c.backend == "remote") {
    c.default_endpoint.check();
    for (const auto& [role, e] : c.endpoints) e.check();
  }
  if (c.orchestrator.phase1_max_attempts < 1 || c.orchestrator.phase2_max_attempts < 1) {
    invalid("retry budgets must be at least 1");
  }
  if (c.junior.default_node_count < 2 || c.junior.max_node_count < c.junior.default_node_count) {
    invalid("junior node counts must satisfy 2 <= default_node_count <= max_node_count");
  }
  for (const auto& [svc, prof] : c.policy.profiles) {
    if (!prof.coefficients.valid()) invalid("policy coefficients for " + to_string(svc) + " are invalid");
  }
  if (c.senior.weight_floor <= 0) invalid("weight_floor must be positive");
  if (c.orchestrator.pseudo_edge_cost < 0) invalid("pseudo_edge_cost must be non-negative");
  if (c.orchestrator.coordination_delay_ms < 0) invalid("coordination_delay_ms must be non-negative");
  return c;
}

json config_to_json(const SystemConfig& c) {
  json j;
  j["registry"] = c.registry.to_json();
  j["backend"] = c.backend;
  j["mock_rules_path"] = c.mock_rules_path;
  j["endpoints"] = {{"default", endpoint_to(c.default_endpoint)}};
  for (const auto& [role, e] : c.endpoints) j["endpoints"][role] = endpoint_to(e);
  j["seed"] = c.seed;
  j["retries"] = {{"phase1_max_attempts", c.orchestrator.phase1_max_attempts},
                  {"phase2_max_attempts", c.orchestrator.phase2_max_attempts},
                  {"max_retries_on_parse", c.junior.max_retries_on_parse}};
  j["phase2_full_restart"] = c.orchestrator.phase2_full_restart;
  j["pseudo_edge_cost"] = c.orchestrator.pseudo_edge_cost;
  j["coordination_delay_ms"] = c.orchestrator.coordination_delay_ms;
  j["junior"] = {{"default_node_count", c.junior.default_node_count}, {"max_node_count", c.junior.max_node_count}};

  json compat = json::object();
  for (const auto& [svc, row] : c.senior.compatibility) {
    for (const auto& [kind, score] : row) compat[to_string(svc)][to_string(kind)] = score;
  }
  json profiles = json::object();
  for (const auto& [svc, w] : c.senior.weight_profiles) {
    profiles[to_string(svc)] = {{"w_latency", w.w_latency},
                                {"w_bandwidth", w.w_bandwidth},
                                {"w_load", w.w_load},
                                {"w_reliability", w.w_reliability}};
  }
  json bounds = json::object();
  for (const auto& [svc, b] : c.senior.qos_bounds) {
    bounds[to_string(svc)] = {{"max_latency_ms", b.max_latency_ms},
                              {"min_bandwidth_mbps", b.min_bandwidth_mbps},
                              {"min_reliability", b.min_reliability}};
  }
  j["senior"] = {{"compatibility", compat},
                 {"min_compatibility", c.senior.min_compatibility},
                 {"weight_profiles", profiles},
                 {"weight_floor", c.senior.weight_floor},
                 {"qos_bounds", bounds}};

  json pprof = json::object();
  for (const auto& [svc, p] : c.policy.profiles) {
    pprof[to_string(svc)] = {{"strategy", to_string(p.strategy)},
                             {"metric", to_string(p.metric)},
                             {"metric_coefficients", p.coefficients}};
  }
  j["policy"] = {{"profiles", pprof}, {"load_threshold", c.policy.load_threshold}, {"load_bump", c.policy.load_bump}};
  j["log_path"] = c.log_path;
  j["audit_path"] = c.audit_path;
  j["state_journal_path"] = c.state_journal_path;
  j["fault_plan"] = c.fault_plan ? json(*c.fault_plan) : json(nullptr);
  return j;
}

SystemConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) invalid("cannot open config file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    invalid("config file " + path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

}  // namespace ibn

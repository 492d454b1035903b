#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>

#include "ibn/a2a.hpp"
#include "ibn/domain.hpp"
#include "ibn/mcp_state.hpp"
#include "ibn/model_gateway.hpp"

namespace ibn {

struct PolicyProfile {
  RoutingStrategy strategy = RoutingStrategy::kDual;
  MetricMode metric = MetricMode::kComposite;
  MetricCoefficients coefficients;
};

struct PolicySettings {
  std::map<ServiceType, PolicyProfile> profiles{
      {ServiceType::kUrllc, {RoutingStrategy::kDual, MetricMode::kComposite, {0.6, 0.1, 0.3}}},
      {ServiceType::kEmbb, {RoutingStrategy::kDual, MetricMode::kComposite, {0.2, 0.5, 0.3}}},
      {ServiceType::kMmtc, {RoutingStrategy::kSpf, MetricMode::kHopCount, {1.0 / 3, 1.0 / 3, 1.0 / 3}}},
  };
  double load_threshold = 0.8;
  double load_bump = 0.2;
};

// Profile coefficients with the load bump applied, not yet renormalized.
MetricCoefficients raw_coefficients(ServiceType svc, double max_load, const PolicySettings& settings);

PromptTemplate policy_prompt_template();

// Strategy and coefficients are a pure function of (svc, state); the
// backend, when given, only writes the rationale. Throws STATE_UNAVAILABLE.
RoutingDecision decide_routing(ServiceType svc, const mcp::NetworkState& state, const PolicySettings& settings,
                               ModelGateway* gateway = nullptr);

// A2A endpoint: POLICY_REQUEST {"service_type", "live_seed"} ->
// ROUTING_DECISION {"decision", "max_load", "link_count"}.
class PolicyAgent {
 public:
  PolicyAgent(std::shared_ptr<ModelGateway> gateway, std::shared_ptr<mcp::McpClient> state, PolicySettings settings)
      : gateway_(std::move(gateway)), state_(std::move(state)), settings_(std::move(settings)) {}

  a2a::Envelope handle(const a2a::Envelope& request);

 private:
  std::shared_ptr<ModelGateway> gateway_;
  std::shared_ptr<mcp::McpClient> state_;
  PolicySettings settings_;
};

}  // namespace ibn

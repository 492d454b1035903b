#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>

#include "ibn/a2a.hpp"
#include "ibn/domain.hpp"
#include "ibn/model_gateway.hpp"

namespace ibn {

struct JuniorSettings {
  int default_node_count = 4;
  int max_node_count = 32;
  int max_retries_on_parse = 2;
  std::uint64_t seed = 42;
};

PromptTemplate junior_prompt_template();

// Builds a topology of the given kind over n infrastructure nodes n0..n{n-1}
// (even index switch, odd index router, all in domain "d0").
//   FULL_MESH     every pair linked
//   HUB_AND_SPOKE n0 is the hub
//   PARTIAL_MESH  ring plus floor(n/3) chords; needs n >= 4
// Structure depends only on (kind, n); attr_seed drives link attributes.
// Throws BAD_SIZE.
TopologySpec generate_topology(TopologyKind kind, int n, std::uint64_t attr_seed);

// Keyword vote used when the model output cannot be parsed. Ties go
// URLLC > EMBB > MMTC.
ServiceType classify_by_keywords(std::string_view text);

TopologyKind default_topology_for(ServiceType svc);

// Seed for the link attributes of a given intent and attempt; both juniors
// derive the same value.
std::uint64_t proposal_seed(const JuniorSettings& s, const Intent& intent, int attempt);

// Throws INTENT_EMPTY; backend failures propagate.
JuniorProposal analyze_intent(const Intent& intent, ModelGateway& gateway, const JuniorSettings& settings,
                              const std::string& agent_id, int attempt = 1);

// A2A endpoint: INTENT_REQUEST {"intent", "attempt"} -> PROPOSAL {"proposal"}.
class JuniorAgent {
 public:
  JuniorAgent(std::string agent_id, std::shared_ptr<ModelGateway> gateway, JuniorSettings settings)
      : agent_id_(std::move(agent_id)), gateway_(std::move(gateway)), settings_(settings) {}

  a2a::Envelope handle(const a2a::Envelope& request);
  const std::string& id() const { return agent_id_; }

 private:
  std::string agent_id_;
  std::shared_ptr<ModelGateway> gateway_;
  JuniorSettings settings_;
};

}  // namespace ibn

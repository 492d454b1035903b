#pragma once

#include <atomic>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ibn/a2a.hpp"
#include "ibn/deployment.hpp"
#include "ibn/domain.hpp"
#include "ibn/error.hpp"
#include "ibn/model_gateway.hpp"

namespace ibn {

struct WeightProfile {
  double w_latency = 0.25;
  double w_bandwidth = 0.25;
  double w_load = 0.25;
  double w_reliability = 0.25;
};

// Per-link QoS bounds used when scoring proposals during arbitration.
struct QosBounds {
  double max_latency_ms = 1e9;
  double min_bandwidth_mbps = 0.0;
  double min_reliability = 0.0;
};

struct SeniorSettings {
  std::map<ServiceType, std::map<TopologyKind, int>> compatibility{
      {ServiceType::kUrllc,
       {{TopologyKind::kFullMesh, 3}, {TopologyKind::kPartialMesh, 2}, {TopologyKind::kHubAndSpoke, 1}}},
      {ServiceType::kEmbb,
       {{TopologyKind::kPartialMesh, 3}, {TopologyKind::kFullMesh, 2}, {TopologyKind::kHubAndSpoke, 1}}},
      {ServiceType::kMmtc,
       {{TopologyKind::kHubAndSpoke, 3}, {TopologyKind::kPartialMesh, 2}, {TopologyKind::kFullMesh, 1}}},
  };
  // Validation rejects service/topology pairs scoring below this.
  int min_compatibility = 2;
  std::map<ServiceType, WeightProfile> weight_profiles{
      {ServiceType::kUrllc, {0.6, 0.1, 0.1, 0.2}},
      {ServiceType::kEmbb, {0.1, 0.6, 0.2, 0.1}},
      {ServiceType::kMmtc, {0.25, 0.25, 0.25, 0.25}},
  };
  double weight_floor = 0.001;
  std::map<ServiceType, QosBounds> qos_bounds{
      {ServiceType::kUrllc, {10.0, 0.0, 0.999}},
      {ServiceType::kEmbb, {1e9, 100.0, 0.0}},
      {ServiceType::kMmtc, {1e9, 0.0, 0.99}},
  };
  int max_retries_on_parse = 2;

  int compatibility_score(ServiceType svc, TopologyKind kind) const;
};

enum class ConsensusStatus { kMatch, kDivergence };

std::string to_string(ConsensusStatus s);

struct ConsensusResult {
  ConsensusStatus status = ConsensusStatus::kMatch;
  std::vector<std::string> divergent_fields;  // "service_type", "topology.kind", "topology.node_count"
  std::optional<JuniorProposal> chosen;
};

// Throws INTENT_MISMATCH.
ConsensusResult compare_proposals(const JuniorProposal& p1, const JuniorProposal& p2);

struct ProposalScore {
  int compatibility = 0;
  double qos_fraction = 0.0;  // share of links within the service's QoS bounds

  auto operator<=>(const ProposalScore&) const = default;
};

ProposalScore score_proposal(const JuniorProposal& p, const SeniorSettings& settings);

struct ArbitrationOutcome {
  JuniorProposal chosen;
  int chosen_index = 1;  // 1 or 2
  ProposalScore score_1;
  ProposalScore score_2;
  bool asked_backend = false;
  bool tie_break = false;  // backend answer unusable, p1 taken by default
  std::string rationale;
};

PromptTemplate arbiter_prompt_template();

// Never fails: a missing or unusable backend falls back to p1.
ArbitrationOutcome arbitrate(const JuniorProposal& p1, const JuniorProposal& p2, const SeniorSettings& settings,
                             ModelGateway* gateway, const std::string& intent_text = {});

// Topology checks plus the compatibility threshold.
ValidationReport validate_proposal(const JuniorProposal& p, const SeniorSettings& settings, int attempt);

template <class Candidate>
struct RetryOutcome {
  Candidate value;
  std::vector<ValidationReport> reports;
};

// Calls source(attempt) and validate(candidate, attempt) for attempt = 1..
// until a report passes. Throws VALIDATION_EXHAUSTED with {"reports": [...]}
// after max_attempts failures, CONFIG_INVALID if max_attempts < 1.
template <class Source, class Validator>
auto validate_with_retry(Source&& source, Validator&& validate, int max_attempts = 3)
    -> RetryOutcome<std::decay_t<decltype(source(1))>> {
  if (max_attempts < 1) throw Error(errc::kConfigInvalid, "max_attempts must be at least 1");
  RetryOutcome<std::decay_t<decltype(source(1))>> out;
  for (int attempt = 1; attempt <= max_attempts; ++attempt) {
    out.value = source(attempt);
    ValidationReport report = validate(out.value, attempt);
    report.attempt = attempt;
    out.reports.push_back(report);
    if (report.passed) return out;
  }
  throw Error(errc::kValidationExhausted, "no candidate passed after " + std::to_string(max_attempts) + " attempts",
              {{"reports", out.reports}});
}

// Proposal flavour using validate_proposal.
RetryOutcome<JuniorProposal> validate_with_retry(const std::function<JuniorProposal(int)>& source,
                                                 const SeniorSettings& settings, int max_attempts = 3);

// Weights from the link attributes; `live` overrides attributes per link id
// without changing the returned spec.
WeightedTopology generate_weights(const TopologySpec& spec, ServiceType svc, const SeniorSettings& settings,
                                  const std::map<std::string, LinkAttributes>& live = {});

// Deterministic; emitted_at is left as given so identical input yields
// byte-identical output.
DeploymentDocument emit_deployment_document(const WeightedTopology& wt, const std::string& task_id,
                                            const std::string& emitted_at = {});

// A2A endpoint.
//   VALIDATION_REQUEST {"intent", "proposals": [p1, p2], "attempt", "max_attempts", "previous_reports"}
//     -> VALIDATION_RESULT {"consensus", "chosen", "report", "arbitrated"}
//     -> ERROR VALIDATION_EXHAUSTED on a failed final attempt
//   WEIGHTS {"task_id", "service_type", "spec", "live_attrs"?}
//     -> WEIGHTS {"weighted_topology", "deployment_document"}
class SeniorAgent {
 public:
  // Replaces validate_proposal when set; used for fault injection.
  using ValidatorHook = std::function<ValidationReport(const JuniorProposal&, int attempt)>;

  SeniorAgent(std::shared_ptr<ModelGateway> gateway, SeniorSettings settings)
      : gateway_(std::move(gateway)), settings_(std::move(settings)) {}

  a2a::Envelope handle(const a2a::Envelope& request);

  void set_validator(ValidatorHook hook) { validator_ = std::move(hook); }
  std::size_t arbitrations() const { return arbitrations_.load(); }
  std::size_t validations() const { return validations_.load(); }
  const SeniorSettings& settings() const { return settings_; }

 private:
  a2a::Envelope handle_validation(const a2a::Envelope& request);
  a2a::Envelope handle_weights(const a2a::Envelope& request);

  std::shared_ptr<ModelGateway> gateway_;
  SeniorSettings settings_;
  ValidatorHook validator_;
  std::atomic<std::size_t> arbitrations_{0};
  std::atomic<std::size_t> validations_{0};
};

void to_json(json& j, const ConsensusResult& v);
void from_json(const json& j, ConsensusResult& v);
void to_json(json& j, const ProposalScore& v);

}  // namespace ibn

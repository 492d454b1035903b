#include "ibn/senior_agent.hpp"

#include <algorithm>
#include <limits>

namespace ibn {

int SeniorSettings::compatibility_score(ServiceType svc, TopologyKind kind) const {
  const auto row = compatibility.find(svc);
  if (row == compatibility.end()) return 0;
  const auto cell = row->second.find(kind);
  return cell == row->second.end() ? 0 : cell->second;
}

std::string to_string(ConsensusStatus s) { return s == ConsensusStatus::kMatch ? "MATCH" : "DIVERGENCE"; }

ConsensusResult compare_proposals(const JuniorProposal& p1, const JuniorProposal& p2) {
  if (p1.intent_id != p2.intent_id) {
    throw Error(errc::kIntentMismatch, "proposals answer different intents",
                {{"intent_1", p1.intent_id}, {"intent_2", p2.intent_id}});
  }
  ConsensusResult r;
  if (p1.service_type != p2.service_type) r.divergent_fields.push_back("service_type");
  if (p1.topology.kind != p2.topology.kind) r.divergent_fields.push_back("topology.kind");
  if (p1.topology.infrastructure_node_count() != p2.topology.infrastructure_node_count()) {
    r.divergent_fields.push_back("topology.node_count");
  }
  if (r.divergent_fields.empty()) {
    r.status = ConsensusStatus::kMatch;
    r.chosen = p1;
  } else {
    r.status = ConsensusStatus::kDivergence;
  }
  return r;
}

ProposalScore score_proposal(const JuniorProposal& p, const SeniorSettings& settings) {
  ProposalScore s;
  s.compatibility = settings.compatibility_score(p.service_type, p.topology.kind);
  const auto it = settings.qos_bounds.find(p.service_type);
  const QosBounds bounds = it == settings.qos_bounds.end() ? QosBounds{} : it->second;
  if (p.topology.links.empty()) return s;
  std::size_t ok = 0;
  for (const auto& l : p.topology.links) {
    if (l.attrs.latency_ms <= bounds.max_latency_ms && l.attrs.bandwidth_mbps >= bounds.min_bandwidth_mbps &&
        l.attrs.reliability >= bounds.min_reliability) {
      ++ok;
    }
  }
  s.qos_fraction = static_cast<double>(ok) / static_cast<double>(p.topology.links.size());
  return s;
}

PromptTemplate arbiter_prompt_template() {
  PromptTemplate t;
  t.role = "arbiter";
  t.template_text =
      "arbiter_task\n"
      "Two candidate designs were produced for the same request and scored equally.\n"
      "proposal_1: {proposal_1}\n"
      "proposal_2: {proposal_2}\n"
      "Answer with one JSON object {\"choice\": \"proposal_1\"} or {\"choice\": \"proposal_2\"}.\n"
      "Request: {intent}";
  t.required_placeholders = {"proposal_1", "proposal_2", "intent"};
  return t;
}

namespace {

std::string summarize(const JuniorProposal& p) {
  return "service_type=" + to_string(p.service_type) + " topology_kind=" + to_string(p.topology.kind) +
         " node_count=" + std::to_string(p.topology.infrastructure_node_count());
}

std::string describe(const ProposalScore& s) {
  return "compatibility " + std::to_string(s.compatibility) + ", qos " + std::to_string(s.qos_fraction);
}

}  // namespace

ArbitrationOutcome arbitrate(const JuniorProposal& p1, const JuniorProposal& p2, const SeniorSettings& settings,
                             ModelGateway* gateway, const std::string& intent_text) {
  ArbitrationOutcome out;
  out.score_1 = score_proposal(p1, settings);
  out.score_2 = score_proposal(p2, settings);
  const auto scores = "p1 (" + describe(out.score_1) + ") vs p2 (" + describe(out.score_2) + ")";

  if (out.score_1 != out.score_2) {
    out.chosen_index = out.score_1 > out.score_2 ? 1 : 2;
    out.rationale = "policy score decides: " + scores;
  } else {
    std::string failure = "no backend configured";
    if (gateway != nullptr) {
      out.asked_backend = true;
      try {
        const auto prompt = render_prompt(
            arbiter_prompt_template(),
            json{{"proposal_1", summarize(p1)}, {"proposal_2", summarize(p2)}, {"intent", intent_text}});
        const auto res = gateway->generate_structured(prompt, {"choice"}, settings.max_retries_on_parse);
        const auto& choice = res.document["choice"];
        if (choice == "proposal_1" || choice == 1) {
          out.chosen_index = 1;
          failure.clear();
        } else if (choice == "proposal_2" || choice == 2) {
          out.chosen_index = 2;
          failure.clear();
        } else {
          failure = "backend choice " + choice.dump() + " not recognised";
        }
      } catch (const Error& e) {
        failure = e.what();
      }
    }
    if (failure.empty()) {
      out.rationale = "scores tied, " + scores + "; backend chose proposal_" + std::to_string(out.chosen_index);
    } else {
      out.chosen_index = 1;
      out.tie_break = true;
      out.rationale = "scores tied, " + scores + "; deterministic tie-break to proposal_1 (" + failure + ")";
    }
  }
  out.chosen = out.chosen_index == 1 ? p1 : p2;
  return out;
}

ValidationReport validate_proposal(const JuniorProposal& p, const SeniorSettings& settings, int attempt) {
  ValidationReport r;
  r.attempt = attempt;
  r.timestamp = utc_now_iso();
  r.violations = validate_topology_spec(p.topology).violations;
  const int compat = settings.compatibility_score(p.service_type, p.topology.kind);
  if (compat < settings.min_compatibility) {
    r.violations.push_back({violation::kIncompatibleService, to_string(p.topology.kind) + " scores " +
                                                                 std::to_string(compat) + " for " +
                                                                 to_string(p.service_type)});
  }
  r.passed = r.violations.empty();
  return r;
}

RetryOutcome<JuniorProposal> validate_with_retry(const std::function<JuniorProposal(int)>& source,
                                                 const SeniorSettings& settings, int max_attempts) {
  return validate_with_retry(
      source, [&](const JuniorProposal& p, int attempt) { return validate_proposal(p, settings, attempt); },
      max_attempts);
}

WeightedTopology generate_weights(const TopologySpec& spec, ServiceType svc, const SeniorSettings& settings,
                                  const std::map<std::string, LinkAttributes>& live) {
  const auto pit = settings.weight_profiles.find(svc);
  const WeightProfile w = pit == settings.weight_profiles.end() ? WeightProfile{} : pit->second;

  std::vector<LinkAttributes> attrs;
  attrs.reserve(spec.links.size());
  for (const auto& l : spec.links) {
    const auto it = live.find(l.id());
    attrs.push_back(it == live.end() ? l.attrs : it->second);
  }

  auto range = [&](auto field) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const auto& a : attrs) {
      lo = std::min(lo, a.*field);
      hi = std::max(hi, a.*field);
    }
    return std::pair{lo, hi};
  };
  auto norm = [](double v, std::pair<double, double> r) {
    return r.second > r.first ? (v - r.first) / (r.second - r.first) : 0.0;
  };
  const auto lat = range(&LinkAttributes::latency_ms);
  const auto bw = range(&LinkAttributes::bandwidth_mbps);

  WeightedTopology wt;
  wt.spec = spec;
  for (std::size_t i = 0; i < spec.links.size(); ++i) {
    const auto& a = attrs[i];
    const double raw = w.w_latency * norm(a.latency_ms, lat) + w.w_bandwidth * (1.0 - norm(a.bandwidth_mbps, bw)) +
                       w.w_load * a.load + w.w_reliability * (1.0 - a.reliability);
    wt.weights[spec.links[i].id()] = settings.weight_floor + std::max(raw, 0.0);
  }
  return wt;
}

DeploymentDocument emit_deployment_document(const WeightedTopology& wt, const std::string& task_id,
                                            const std::string& emitted_at) {
  DeploymentDocument doc;
  doc.task_id = task_id;
  doc.topology = wt;
  doc.emitted_at = emitted_at;

  auto nodes = wt.spec.nodes;
  std::sort(nodes.begin(), nodes.end(), [](const Node& a, const Node& b) { return a.node_id < b.node_id; });
  for (const auto& n : nodes) {
    doc.instructions.push_back(
        {InstructionAction::kCreateNode,
         json{{"node_id", n.node_id}, {"role", to_string(n.role)}, {"domain_id", n.domain_id}}});
  }

  struct Ordered {
    std::string a, b;
    const Link* link;
  };
  std::vector<Ordered> links;
  for (const auto& l : wt.spec.links) {
    links.push_back({std::min(l.endpoint_a, l.endpoint_b), std::max(l.endpoint_a, l.endpoint_b), &l});
  }
  std::sort(links.begin(), links.end(),
            [](const Ordered& x, const Ordered& y) { return std::tie(x.a, x.b) < std::tie(y.a, y.b); });
  for (const auto& l : links) {
    doc.instructions.push_back(
        {InstructionAction::kCreateLink, json{{"endpoint_a", l.a}, {"endpoint_b", l.b}, {"attrs", l.link->attrs}}});
  }
  for (const auto& l : links) {
    const auto id = link_id(l.a, l.b);
    const auto it = wt.weights.find(id);
    doc.instructions.push_back({InstructionAction::kSetWeight,
                                json{{"link_id", id}, {"weight", it == wt.weights.end() ? 0.0 : it->second}}});
  }
  return doc;
}

a2a::Envelope SeniorAgent::handle(const a2a::Envelope& request) {
  switch (request.kind) {
    case a2a::MessageKind::kValidationRequest: return handle_validation(request);
    case a2a::MessageKind::kWeights: return handle_weights(request);
    default: throw Error(errc::kBadRequest, "senior does not accept " + a2a::to_string(request.kind));
  }
}

a2a::Envelope SeniorAgent::handle_validation(const a2a::Envelope& request) {
  const auto& payload = request.payload;
  const auto proposals = payload.at("proposals").get<std::vector<JuniorProposal>>();
  if (proposals.size() != 2) throw Error(errc::kBadRequest, "VALIDATION_REQUEST needs exactly two proposals");
  const int attempt = payload.value("attempt", 1);
  const int max_attempts = payload.value("max_attempts", 3);
  const auto intent_text = payload.contains("intent") ? payload["intent"].value("raw_text", std::string{}) : "";

  auto consensus = compare_proposals(proposals[0], proposals[1]);
  json arbitration = nullptr;
  if (consensus.status == ConsensusStatus::kDivergence) {
    ++arbitrations_;
    auto outcome = arbitrate(proposals[0], proposals[1], settings_, gateway_.get(), intent_text);
    consensus.chosen = outcome.chosen;
    arbitration = {{"chosen_index", outcome.chosen_index},
                   {"score_1", outcome.score_1},
                   {"score_2", outcome.score_2},
                   {"asked_backend", outcome.asked_backend},
                   {"tie_break", outcome.tie_break},
                   {"rationale", outcome.rationale}};
  }

  ++validations_;
  ValidationReport report = validator_ ? validator_(*consensus.chosen, attempt)
                                       : validate_proposal(*consensus.chosen, settings_, attempt);
  report.attempt = attempt;
  if (report.timestamp.empty()) report.timestamp = utc_now_iso();

  if (!report.passed && attempt >= max_attempts) {
    auto reports = payload.value("previous_reports", json::array());
    reports.push_back(report);
    throw Error(errc::kValidationExhausted,
                "phase-1 validation failed on all " + std::to_string(max_attempts) + " attempts",
                {{"reports", reports}});
  }
  return a2a::make_response(request, a2a::MessageKind::kValidationResult,
                            json{{"consensus", consensus},
                                 {"chosen", *consensus.chosen},
                                 {"report", report},
                                 {"arbitrated", !arbitration.is_null()},
                                 {"arbitration", arbitration}});
}

a2a::Envelope SeniorAgent::handle_weights(const a2a::Envelope& request) {
  const auto& payload = request.payload;
  const auto spec = payload.at("spec").get<TopologySpec>();
  const auto svc = payload.at("service_type").get<ServiceType>();
  std::map<std::string, LinkAttributes> live;
  if (payload.contains("live_attrs") && payload["live_attrs"].is_object()) {
    live = payload["live_attrs"].get<std::map<std::string, LinkAttributes>>();
  }
  const auto wt = generate_weights(spec, svc, settings_, live);
  const auto doc = emit_deployment_document(wt, payload.value("task_id", request.task_id), utc_now_iso());
  return a2a::make_response(request, a2a::MessageKind::kWeights,
                            json{{"weighted_topology", wt}, {"deployment_document", doc}});
}

void to_json(json& j, const ConsensusResult& v) {
  j = json{{"status", to_string(v.status)}, {"divergent_fields", v.divergent_fields}};
  j["chosen"] = v.chosen ? json(*v.chosen) : json(nullptr);
}

void from_json(const json& j, ConsensusResult& v) {
  v.status = j.at("status").get<std::string>() == "MATCH" ? ConsensusStatus::kMatch : ConsensusStatus::kDivergence;
  v.divergent_fields = j.at("divergent_fields").get<std::vector<std::string>>();
  if (j.contains("chosen") && !j["chosen"].is_null()) {
    v.chosen = j["chosen"].get<JuniorProposal>();
  } else {
    v.chosen.reset();
  }
}

void to_json(json& j, const ProposalScore& v) {
  j = json{{"compatibility", v.compatibility}, {"qos_fraction", v.qos_fraction}};
}

}  // namespace ibn

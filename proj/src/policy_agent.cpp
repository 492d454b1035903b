#include "ibn/policy_agent.hpp"

#include <cstdio>

#include "ibn/error.hpp"

namespace ibn {

MetricCoefficients raw_coefficients(ServiceType svc, double max_load, const PolicySettings& settings) {
  const auto it = settings.profiles.find(svc);
  if (it == settings.profiles.end()) throw Error(errc::kConfigInvalid, "no policy profile for " + to_string(svc));
  auto c = it->second.coefficients;
  if (max_load > settings.load_threshold) c.w_load += settings.load_bump;
  return c;
}

PromptTemplate policy_prompt_template() {
  PromptTemplate t;
  t.role = "policy";
  t.template_text =
      "policy_task\n"
      "In one sentence, explain why {strategy} with coefficients {coefficients} suits a {service_type} slice.\n"
      "Network: {state_summary}";
  t.required_placeholders = {"strategy", "coefficients", "service_type", "state_summary"};
  return t;
}

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

}  // namespace

RoutingDecision decide_routing(ServiceType svc, const mcp::NetworkState& state, const PolicySettings& settings,
                               ModelGateway* gateway) {
  if (!state.topology) throw Error(errc::kStateUnavailable, "network state holds no deployed topology");
  const auto& profile = settings.profiles.at(svc);
  const double max_load = state.max_load();
  const auto raw = raw_coefficients(svc, max_load, settings);

  RoutingDecision d;
  d.strategy = profile.strategy;
  d.metric = profile.metric;
  d.coefficients = raw.normalized();

  const auto coeffs = "(" + fmt(d.coefficients.w_latency) + ", " + fmt(d.coefficients.w_load) + ", " +
                      fmt(d.coefficients.w_reliability) + ")";
  const auto summary = std::to_string(state.topology->spec.links.size()) + " links, max load " + fmt(max_load) +
                       (max_load > settings.load_threshold ? " above" : " within") + " threshold " +
                       fmt(settings.load_threshold);
  d.rationale = to_string(svc) + " -> " + to_string(d.strategy) + " " + to_string(d.metric) + " " + coeffs + "; " +
                summary;
  if (gateway != nullptr) {
    try {
      const auto prompt = render_prompt(policy_prompt_template(), json{{"strategy", to_string(d.strategy)},
                                                                       {"coefficients", coeffs},
                                                                       {"service_type", to_string(svc)},
                                                                       {"state_summary", summary}});
      const auto text = gateway->generate(prompt).raw_text;
      if (!text.empty()) d.rationale += "; " + text;
    } catch (const Error&) {
      // Rationale text is optional; the decision stands without it.
    }
  }
  return d;
}

a2a::Envelope PolicyAgent::handle(const a2a::Envelope& request) {
  if (request.kind != a2a::MessageKind::kPolicyRequest) {
    throw Error(errc::kBadRequest, "policy only accepts POLICY_REQUEST");
  }
  const auto svc = request.payload.at("service_type").get<ServiceType>();
  const auto seed = request.payload.value("live_seed", std::uint64_t{0});
  std::shared_ptr<const mcp::NetworkState> state;
  try {
    state = state_->live_state(seed);
  } catch (const Error& e) {
    if (e.code() == errc::kNoTopology) throw Error(errc::kStateUnavailable, e.what());
    throw;
  }
  const auto decision = decide_routing(svc, *state, settings_, gateway_.get());
  return a2a::make_response(request, a2a::MessageKind::kRoutingDecision,
                            json{{"decision", decision},
                                 {"max_load", state->max_load()},
                                 {"link_count", state->topology->spec.links.size()}});
}

}  // namespace ibn

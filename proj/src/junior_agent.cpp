#include "ibn/junior_agent.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>

#include "ibn/error.hpp"
#include "ibn/rng.hpp"

namespace ibn {

namespace {

double round_to(double v, double step) { return std::round(v / step) * step; }

LinkAttributes draw_attributes(Rng& rng) {
  LinkAttributes a;
  a.latency_ms = round_to(rng.uniform(1.0, 20.0), 0.01);
  a.bandwidth_mbps = round_to(rng.uniform(100.0, 10000.0), 1.0);
  a.load = round_to(rng.uniform(0.05, 0.6), 0.001);
  a.reliability = round_to(rng.uniform(0.999, 0.99999), 0.00001);
  return a;
}

std::string words_of(std::string_view text) {
  std::string out = " ";
  for (char c : text) {
    const auto u = static_cast<unsigned char>(c);
    if (std::isalnum(u)) {
      out.push_back(static_cast<char>(std::tolower(u)));
    } else if (out.back() != ' ') {
      out.push_back(' ');
    }
  }
  if (out.back() != ' ') out.push_back(' ');
  return out;
}

}  // namespace

PromptTemplate junior_prompt_template() {
  PromptTemplate t;
  t.role = "junior";
  t.template_text =
      "junior_task\n"
      "You translate a network request into a 5G service plan.\n"
      "Answer with one JSON object with the keys service_type (EMBB, URLLC or MMTC), "
      "topology_kind (FULL_MESH, PARTIAL_MESH or HUB_AND_SPOKE), node_count (integer) "
      "and qos_targets (object).\n"
      "Request: {intent}";
  t.required_placeholders = {"intent"};
  return t;
}

TopologySpec generate_topology(TopologyKind kind, int n, std::uint64_t attr_seed) {
  if (n < 2) throw Error(errc::kBadSize, "topology needs at least 2 nodes", {{"n", n}});
  if (kind == TopologyKind::kPartialMesh && n < 4) {
    throw Error(errc::kBadSize, "partial mesh needs at least 4 nodes", {{"n", n}});
  }

  TopologySpec spec;
  spec.kind = kind;
  for (int i = 0; i < n; ++i) {
    spec.nodes.push_back({"n" + std::to_string(i), i % 2 == 0 ? NodeRole::kSwitch : NodeRole::kRouter, "d0"});
  }

  std::vector<std::pair<int, int>> pairs;
  switch (kind) {
    case TopologyKind::kFullMesh:
      for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
      }
      break;
    case TopologyKind::kHubAndSpoke:
      for (int i = 1; i < n; ++i) pairs.emplace_back(0, i);
      break;
    case TopologyKind::kPartialMesh: {
      for (int i = 0; i < n; ++i) pairs.emplace_back(std::min(i, (i + 1) % n), std::max(i, (i + 1) % n));
      std::vector<std::pair<int, int>> chords;
      for (int i = 0; i < n; ++i) {
        for (int j = i + 2; j < n; ++j) {
          if (!(i == 0 && j == n - 1)) chords.emplace_back(i, j);
        }
      }
      // Chord choice is seeded by n alone so structure never depends on attr_seed.
      Rng structure(0x5eedULL * 1000003ULL + static_cast<std::uint64_t>(n));
      for (int c = 0; c < n / 3; ++c) {
        const auto pick = structure.below(chords.size());
        pairs.push_back(chords[pick]);
        chords.erase(chords.begin() + static_cast<std::ptrdiff_t>(pick));
      }
      break;
    }
  }

  Rng attrs(attr_seed);
  for (const auto& [a, b] : pairs) {
    spec.links.push_back({spec.nodes[static_cast<std::size_t>(a)].node_id,
                          spec.nodes[static_cast<std::size_t>(b)].node_id, draw_attributes(attrs)});
  }
  return spec;
}

ServiceType classify_by_keywords(std::string_view text) {
  static const std::array<std::pair<ServiceType, std::vector<std::string>>, 3> table{{
      {ServiceType::kUrllc, {"latency", "reliable", "critical", "control"}},
      {ServiceType::kEmbb, {"bandwidth", "video", "broadband", "throughput"}},
      {ServiceType::kMmtc, {"sensor", "iot", "massive", "meter"}},
  }};
  const auto words = words_of(text);
  ServiceType best = ServiceType::kUrllc;
  int best_hits = -1;
  for (const auto& [svc, keywords] : table) {
    int hits = 0;
    for (const auto& k : keywords) {
      // Whole words plus simple plurals ("sensors", "meters").
      if (words.find(" " + k + " ") != std::string::npos || words.find(" " + k + "s ") != std::string::npos) ++hits;
    }
    if (hits > best_hits) {
      best = svc;
      best_hits = hits;
    }
  }
  return best;
}

TopologyKind default_topology_for(ServiceType svc) {
  switch (svc) {
    case ServiceType::kUrllc: return TopologyKind::kFullMesh;
    case ServiceType::kEmbb: return TopologyKind::kPartialMesh;
    case ServiceType::kMmtc: return TopologyKind::kHubAndSpoke;
  }
  return TopologyKind::kPartialMesh;
}

std::uint64_t proposal_seed(const JuniorSettings& s, const Intent& intent, int attempt) {
  return s.seed ^ stable_hash(intent.raw_text) ^ (static_cast<std::uint64_t>(attempt) * 0x9e3779b97f4a7c15ULL);
}

JuniorProposal analyze_intent(const Intent& intent, ModelGateway& gateway, const JuniorSettings& settings,
                              const std::string& agent_id, int attempt) {
  if (std::all_of(intent.raw_text.begin(), intent.raw_text.end(),
                  [](char c) { return std::isspace(static_cast<unsigned char>(c)); })) {
    throw Error(errc::kIntentEmpty, "intent text is empty");
  }

  const auto prompt = render_prompt(junior_prompt_template(), json{{"intent", intent.raw_text}});
  JuniorProposal p;
  p.agent_id = agent_id;
  p.intent_id = intent.intent_id;

  std::optional<ServiceType> svc;
  std::optional<TopologyKind> kind;
  int node_count = settings.default_node_count;
  json qos = json::object();
  json extra = json::object();
  int generations = 0;
  try {
    auto result = gateway.generate_structured(prompt, {"service_type"}, settings.max_retries_on_parse);
    generations = static_cast<int>(result.generations.size());
    p.model_raw_output = result.generations.back().raw_text;
    const auto& doc = result.document;
    if (doc["service_type"].is_string()) svc = parse_service_type(doc["service_type"].get<std::string>());
    if (doc.contains("topology_kind") && doc["topology_kind"].is_string()) {
      kind = parse_topology_kind(doc["topology_kind"].get<std::string>());
    }
    if (doc.contains("node_count") && doc["node_count"].is_number_integer()) {
      node_count = doc["node_count"].get<int>();
    }
    if (doc.contains("qos_targets") && doc["qos_targets"].is_object()) qos = doc["qos_targets"];
    if (doc.contains("slice_name") && doc["slice_name"].is_string()) extra["slice_name"] = doc["slice_name"];
  } catch (const Error& e) {
    if (e.code() != errc::kNoJsonFound && e.code() != errc::kMissingField) throw;
    generations = settings.max_retries_on_parse + 1;
  }

  const bool fallback = !svc.has_value();
  if (fallback) {
    svc = classify_by_keywords(intent.raw_text);
    kind.reset();
  }
  if (!kind) kind = default_topology_for(*svc);

  const int min_nodes = *kind == TopologyKind::kPartialMesh ? 4 : 2;
  const int requested = node_count;
  node_count = std::clamp(node_count, min_nodes, std::max(min_nodes, settings.max_node_count));

  p.service_type = *svc;
  p.topology = generate_topology(*kind, node_count, proposal_seed(settings, intent, attempt));
  p.service_config = {{"slice_name", extra.value("slice_name", "slice-" + to_string(*svc))},
                      {"qos_targets", qos},
                      {"node_count", node_count},
                      {"fallback", fallback},
                      {"model_calls", generations},
                      {"attempt", attempt}};
  if (requested != node_count) p.service_config["requested_node_count"] = requested;
  return p;
}

a2a::Envelope JuniorAgent::handle(const a2a::Envelope& request) {
  if (request.kind != a2a::MessageKind::kIntentRequest) {
    throw Error(errc::kBadRequest, agent_id_ + " only accepts INTENT_REQUEST");
  }
  const auto intent = request.payload.at("intent").get<Intent>();
  const int attempt = request.payload.value("attempt", 1);
  auto proposal = analyze_intent(intent, *gateway_, settings_, agent_id_, attempt);
  return a2a::make_response(request, a2a::MessageKind::kProposal, json{{"proposal", proposal}});
}

}  // namespace ibn

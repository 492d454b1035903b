#include "ibn/mcp_state.hpp"

#include <algorithm>
#include <fstream>

#include <httplib.h>

#include "ibn/error.hpp"
#include "ibn/rng.hpp"

namespace ibn::mcp {

double NetworkState::max_load() const {
  double m = 0.0;
  for (const auto& [id, a] : live_attrs) m = std::max(m, a.load);
  return m;
}

double jittered_load(double load, std::uint64_t seed, const std::string& link_id) {
  Rng rng(seed ^ stable_hash(link_id));
  return std::clamp(load + rng.uniform(-0.1, 0.1), 0.0, 1.0);
}

std::map<std::string, LinkAttributes> jitter_live_attrs(const TopologySpec& spec, std::uint64_t seed) {
  std::map<std::string, LinkAttributes> out;
  for (const auto& l : spec.links) {
    auto a = l.attrs;
    a.load = jittered_load(a.load, seed, l.id());
    out.emplace(l.id(), a);
  }
  return out;
}

namespace {

std::map<std::string, LinkAttributes> spec_attrs(const TopologySpec& spec) {
  std::map<std::string, LinkAttributes> out;
  for (const auto& l : spec.links) out.emplace(l.id(), l.attrs);
  return out;
}

}  // namespace

StateStore::StateStore(std::filesystem::path journal)
    : state_(std::make_shared<NetworkState>()), journal_(std::move(journal)) {
  if (journal_.empty() || !std::filesystem::exists(journal_)) return;
  std::ifstream in(journal_);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      apply(json::parse(line).get<DeploymentRecord>());
    } catch (const std::exception& e) {
      throw Error(errc::kConfigInvalid, "state journal " + journal_.string() + " line " + std::to_string(line_no) +
                                            ": " + e.what());
    }
  }
}

void StateStore::apply(const DeploymentRecord& rec) {
  auto next = std::make_shared<NetworkState>(*state_);
  next->deployments.push_back(rec);
  if (rec.result.value("success", false)) {
    next->topology = rec.document.topology;
    next->live_attrs = spec_attrs(rec.document.topology.spec);
  }
  next->updated_at = rec.recorded_at;
  state_ = std::move(next);
}

json StateStore::record_deployment(const DeploymentDocument& doc, const json& result) {
  DeploymentRecord rec{doc.task_id, doc, result, utc_now_iso()};
  std::lock_guard lock(mu_);
  if (!journal_.empty()) {
    std::ofstream out(journal_, std::ios::app);
    out << json(rec).dump() << '\n';
  }
  apply(rec);
  return json{{"acknowledged", true},
              {"task_id", doc.task_id},
              {"deployment_index", state_->deployments.size() - 1},
              {"topology_replaced", result.value("success", false)}};
}

std::shared_ptr<const NetworkState> StateStore::snapshot() const {
  std::lock_guard lock(mu_);
  return state_;
}

std::shared_ptr<const NetworkState> StateStore::live_state(std::uint64_t seed) const {
  const auto base = snapshot();
  if (!base->topology) throw Error(errc::kNoTopology, "no topology has been deployed");
  auto live = std::make_shared<NetworkState>(*base);
  live->live_attrs = jitter_live_attrs(base->topology->spec, seed);
  return live;
}

void StateStore::mount(a2a::Server& server) {
  server.add_get("/state/topology", [this](const a2a::HttpRequest&) {
    const auto s = snapshot();
    if (!s->topology) {
      return a2a::HttpReply{404, json{{"code", errc::kNoTopology}, {"message", "no topology"}}.dump()};
    }
    return a2a::HttpReply{200, json(*s->topology).dump()};
  });
  server.add_get("/state/live", [this](const a2a::HttpRequest& req) {
    std::uint64_t seed = 0;
    if (const auto it = req.params.find("seed"); it != req.params.end()) seed = std::stoull(it->second);
    try {
      return a2a::HttpReply{200, json(*live_state(seed)).dump()};
    } catch (const Error& e) {
      return a2a::HttpReply{404, json{{"code", e.code()}, {"message", e.what()}}.dump()};
    }
  });
  server.add_post("/state/deployment", [this](const a2a::HttpRequest& req) {
    try {
      const auto body = json::parse(req.body);
      return a2a::HttpReply{
          200, record_deployment(body.at("document").get<DeploymentDocument>(), body.value("result", json::object()))
                   .dump()};
    } catch (const std::exception& e) {
      return a2a::HttpReply{400, json{{"code", errc::kBadRequest}, {"message", e.what()}}.dump()};
    }
  });
}

a2a::Envelope StateStore::handle(const a2a::Envelope& request) {
  if (request.kind != a2a::MessageKind::kDeploymentResult) {
    throw Error(errc::kBadRequest, "mcp_state only accepts DEPLOYMENT_RESULT");
  }
  auto ack = record_deployment(request.payload.at("document").get<DeploymentDocument>(),
                               request.payload.value("result", json::object()));
  return a2a::make_response(request, a2a::MessageKind::kAck, ack);
}

std::shared_ptr<const NetworkState> HttpMcpClient::live_state(std::uint64_t seed) {
  httplib::Client cli(addr_.host, addr_.port);
  cli.set_connection_timeout(std::chrono::milliseconds(timeout_ms_));
  cli.set_read_timeout(std::chrono::milliseconds(timeout_ms_));
  auto res = cli.Get("/state/live?seed=" + std::to_string(seed));
  if (!res) {
    throw Error(errc::kStateUnavailable, "state server " + addr_.host + ":" + std::to_string(addr_.port) +
                                             " unreachable: " + httplib::to_string(res.error()));
  }
  if (res->status == 404) throw Error(errc::kNoTopology, "no topology has been deployed");
  if (res->status != 200) throw Error(errc::kStateUnavailable, "state server answered " + std::to_string(res->status));
  return std::make_shared<const NetworkState>(json::parse(res->body).get<NetworkState>());
}

void to_json(json& j, const DeploymentRecord& v) {
  j = json{{"task_id", v.task_id}, {"document", v.document}, {"result", v.result}, {"recorded_at", v.recorded_at}};
}

void from_json(const json& j, DeploymentRecord& v) {
  v.task_id = j.at("task_id").get<std::string>();
  v.document = j.at("document").get<DeploymentDocument>();
  v.result = j.value("result", json::object());
  v.recorded_at = j.value("recorded_at", std::string{});
}

void to_json(json& j, const NetworkState& v) {
  j = json{{"topology", v.topology ? json(*v.topology) : json(nullptr)},
           {"live_attrs", v.live_attrs},
           {"deployments", v.deployments},
           {"updated_at", v.updated_at}};
}

void from_json(const json& j, NetworkState& v) {
  v = {};
  if (j.contains("topology") && !j["topology"].is_null()) v.topology = j["topology"].get<WeightedTopology>();
  v.live_attrs = j.value("live_attrs", std::map<std::string, LinkAttributes>{});
  v.deployments = j.value("deployments", std::vector<DeploymentRecord>{});
  v.updated_at = j.value("updated_at", std::string{});
}

}  // namespace ibn::mcp

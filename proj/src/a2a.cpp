#include "ibn/a2a.hpp"

#include <sys/socket.h>
#include <unistd.h>

#include <chrono>
#include <fstream>
#include <random>
#include <set>

#include <httplib.h>

#include "ibn/domain.hpp"
#include "ibn/error.hpp"

namespace ibn::a2a {

namespace {

constexpr const char* kHandlerElapsedHeader = "X-Handler-Elapsed-Ms";

const std::vector<std::pair<MessageKind, const char*>>& kind_names() {
  static const std::vector<std::pair<MessageKind, const char*>> names{
      {MessageKind::kIntentRequest, "INTENT_REQUEST"},
      {MessageKind::kProposal, "PROPOSAL"},
      {MessageKind::kValidationRequest, "VALIDATION_REQUEST"},
      {MessageKind::kValidationResult, "VALIDATION_RESULT"},
      {MessageKind::kArbitrationResult, "ARBITRATION_RESULT"},
      {MessageKind::kWeights, "WEIGHTS"},
      {MessageKind::kPolicyRequest, "POLICY_REQUEST"},
      {MessageKind::kRoutingDecision, "ROUTING_DECISION"},
      {MessageKind::kDeploymentResult, "DEPLOYMENT_RESULT"},
      {MessageKind::kAck, "ACK"},
      {MessageKind::kError, "ERROR"},
  };
  return names;
}

std::string string_field(const json& j, const char* name, bool required) {
  const auto it = j.find(name);
  if (it == j.end()) {
    if (required) throw Error(errc::kBadEnvelope, std::string("envelope lacks '") + name + "'");
    return {};
  }
  if (!it->is_string()) throw Error(errc::kBadEnvelope, std::string("envelope field '") + name + "' must be a string");
  return it->get<std::string>();
}

}  // namespace

std::string to_string(MessageKind k) {
  for (const auto& [kind, name] : kind_names()) {
    if (kind == k) return name;
  }
  return "?";
}

std::optional<MessageKind> parse_message_kind(std::string_view s) {
  for (const auto& [kind, name] : kind_names()) {
    if (s == name) return kind;
  }
  return std::nullopt;
}

void to_json(json& j, const Envelope& e) {
  j = json{{"message_id", e.message_id},     {"task_id", e.task_id},   {"correlation_id", e.correlation_id},
           {"from_agent", e.from_agent},     {"to_agent", e.to_agent}, {"kind", to_string(e.kind)},
           {"payload", e.payload},           {"timestamp", e.timestamp}};
}

Envelope envelope_from_json(const json& j) {
  if (!j.is_object()) throw Error(errc::kBadEnvelope, "envelope must be a JSON object");
  Envelope e;
  e.message_id = string_field(j, "message_id", true);
  e.task_id = string_field(j, "task_id", true);
  e.correlation_id = string_field(j, "correlation_id", false);
  e.from_agent = string_field(j, "from_agent", true);
  e.to_agent = string_field(j, "to_agent", true);
  const auto kind = parse_message_kind(string_field(j, "kind", true));
  if (!kind) throw Error(errc::kBadEnvelope, "unknown message kind '" + j["kind"].get<std::string>() + "'");
  e.kind = *kind;
  e.payload = j.contains("payload") ? j["payload"] : json::object();
  e.timestamp = string_field(j, "timestamp", false);
  if (e.message_id.empty()) throw Error(errc::kBadEnvelope, "message_id must not be empty");
  return e;
}

std::string new_message_id() {
  static std::atomic<std::uint64_t> counter{0};
  static const std::uint64_t salt = [] {
    std::random_device rd;
    return (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
  }();
  const auto n = counter.fetch_add(1);
  char buf[40];
  std::snprintf(buf, sizeof buf, "m-%08llx-%06llx", static_cast<unsigned long long>(salt & 0xffffffffULL),
                static_cast<unsigned long long>(n));
  return buf;
}

Envelope make_request(std::string task_id, std::string from, std::string to, MessageKind kind, json payload) {
  Envelope e;
  e.message_id = new_message_id();
  e.task_id = std::move(task_id);
  e.from_agent = std::move(from);
  e.to_agent = std::move(to);
  e.kind = kind;
  e.payload = std::move(payload);
  e.timestamp = utc_now_iso();
  return e;
}

Envelope make_response(const Envelope& request, MessageKind kind, json payload) {
  Envelope e;
  e.message_id = new_message_id();
  e.task_id = request.task_id;
  e.correlation_id = request.message_id;
  e.from_agent = request.to_agent;
  e.to_agent = request.from_agent;
  e.kind = kind;
  e.payload = std::move(payload);
  e.timestamp = utc_now_iso();
  return e;
}

Envelope make_error(const Envelope& request, const std::string& code, const std::string& message, json detail) {
  return make_response(request, MessageKind::kError,
                       json{{"code", code}, {"message", message}, {"detail", std::move(detail)}});
}

// ---- registry -----------------------------------------------------------------

AgentRegistry AgentRegistry::defaults() {
  AgentRegistry r;
  r.set(role::kIntentUi, {"127.0.0.1", 8000});
  r.set(role::kJunior1, {"127.0.0.1", 8011});
  r.set(role::kJunior2, {"127.0.0.1", 8012});
  r.set(role::kSenior, {"127.0.0.1", 8013});
  r.set(role::kPolicy, {"127.0.0.1", 8014});
  r.set(role::kMcpState, {"127.0.0.1", 8015});
  return r;
}

AgentRegistry AgentRegistry::from_json(const json& j) {
  AgentRegistry r = defaults();
  if (j.is_null()) return r;
  if (!j.is_object()) throw Error(errc::kConfigInvalid, "registry must be an object");
  for (const auto& [role_name, entry] : j.items()) {
    if (!entry.is_object() || !entry.contains("port") || !entry["port"].is_number_integer()) {
      throw Error(errc::kConfigInvalid, "registry entry '" + role_name + "' needs an integer port");
    }
    r.set(role_name, {entry.value("host", "127.0.0.1"), entry["port"].get<int>()});
  }
  return r;
}

json AgentRegistry::to_json() const {
  json j = json::object();
  for (const auto& [r, a] : entries_) j[r] = {{"host", a.host}, {"port", a.port}};
  return j;
}

void AgentRegistry::set(const std::string& r, AgentAddress addr) { entries_[r] = std::move(addr); }

const AgentAddress* AgentRegistry::find(const std::string& r) const {
  const auto it = entries_.find(r);
  return it == entries_.end() ? nullptr : &it->second;
}

void AgentRegistry::check() const {
  for (const char* r : {role::kIntentUi, role::kJunior1, role::kJunior2, role::kSenior, role::kPolicy,
                        role::kMcpState}) {
    if (!contains(r)) throw Error(errc::kConfigInvalid, std::string("registry lacks role '") + r + "'");
  }
  std::map<std::pair<std::string, int>, std::string> seen;
  for (const auto& [r, a] : entries_) {
    if (a.port < 0 || a.port > 65535) throw Error(errc::kConfigInvalid, "role '" + r + "' has an invalid port");
    if (a.port == 0) continue;  // ephemeral
    const auto [it, inserted] = seen.emplace(std::pair{a.host, a.port}, r);
    if (!inserted) {
      throw Error(errc::kPortInUse, "roles '" + it->second + "' and '" + r + "' share port " + std::to_string(a.port),
                  {{"port", a.port}});
    }
  }
}

// ---- log ----------------------------------------------------------------------

MessageLog::MessageLog(const std::filesystem::path& path) {
  file_ = std::fopen(path.c_str(), "a");
  if (!file_) throw Error(errc::kConfigInvalid, "cannot open message log " + path.string());
}

MessageLog::~MessageLog() {
  if (file_) {
    sync();
    std::fclose(file_);
  }
}

void MessageLog::append(const Envelope& e) {
  std::unique_lock lock(mu_);
  entries_.push_back(e);
  if (file_) {
    const auto line = json(e).dump() + "\n";
    std::fputs(line.c_str(), file_);
  }
}

std::vector<Envelope> MessageLog::query(const std::string& task_id) const {
  std::shared_lock lock(mu_);
  std::vector<Envelope> out;
  for (const auto& e : entries_) {
    if (e.task_id == task_id) out.push_back(e);
  }
  return out;
}

std::vector<Envelope> MessageLog::all() const {
  std::shared_lock lock(mu_);
  return entries_;
}

std::size_t MessageLog::size() const {
  std::shared_lock lock(mu_);
  return entries_.size();
}

void MessageLog::sync() {
  std::unique_lock lock(mu_);
  if (!file_) return;
  std::fflush(file_);
  ::fsync(::fileno(file_));
}

std::vector<Envelope> MessageLog::load_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(errc::kConfigInvalid, "cannot read message log " + path.string());
  std::vector<Envelope> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out.push_back(envelope_from_json(json::parse(line)));
  }
  return out;
}

// ---- dispatch / transports --------------------------------------------------------

Delivery dispatch(const std::string& r, const Handler& handler, const std::string& body) {
  Envelope request;
  auto parsed = json::parse(body, nullptr, false);
  try {
    if (parsed.is_discarded()) throw Error(errc::kBadEnvelope, "request body is not JSON");
    request = envelope_from_json(parsed);
    if (request.to_agent != r) {
      throw Error(errc::kBadEnvelope, "envelope addressed to '" + request.to_agent + "' reached '" + r + "'");
    }
    if (request.is_response()) throw Error(errc::kBadEnvelope, "agents accept requests only");
  } catch (const Error& e) {
    Envelope stub;
    stub.message_id = request.message_id.empty() ? "unknown" : request.message_id;
    stub.task_id = request.task_id;
    stub.from_agent = request.from_agent.empty() ? "unknown" : request.from_agent;
    stub.to_agent = r;
    return {make_error(stub, e.code(), e.what()), 0.0};
  }

  const auto t0 = std::chrono::steady_clock::now();
  Envelope response;
  try {
    response = handler(request);
  } catch (const Error& e) {
    response = make_error(request, e.code(), e.what(), e.detail());
  } catch (const std::exception& e) {
    response = make_error(request, "INTERNAL", e.what());
  }
  const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return {std::move(response), ms};
}

Delivery HttpTransport::deliver(const std::string& r, const AgentAddress& addr, const Envelope& request) {
  httplib::Client cli(addr.host, addr.port);
  const auto timeout = std::chrono::milliseconds(timeout_ms_);
  cli.set_connection_timeout(std::chrono::milliseconds(2000));
  cli.set_read_timeout(timeout);
  cli.set_write_timeout(timeout);
  auto res = cli.Post("/a2a", json(request).dump(), "application/json");
  if (!res) {
    throw Error(errc::kTransportFailure, "POST to " + r + " at " + addr.host + ":" + std::to_string(addr.port) +
                                             " failed: " + httplib::to_string(res.error()));
  }
  auto parsed = json::parse(res->body, nullptr, false);
  if (parsed.is_discarded()) throw Error(errc::kTransportFailure, r + " answered with a non-JSON body");
  Delivery d{envelope_from_json(parsed), 0.0};
  if (res->has_header(kHandlerElapsedHeader)) {
    d.handler_ms = std::stod(res->get_header_value(kHandlerElapsedHeader));
  }
  return d;
}

void InProcessTransport::bind(const std::string& r, Handler handler) {
  std::unique_lock lock(mu_);
  handlers_[r] = std::move(handler);
}

Delivery InProcessTransport::deliver(const std::string& r, const AgentAddress&, const Envelope& request) {
  Handler h;
  {
    std::shared_lock lock(mu_);
    const auto it = handlers_.find(r);
    if (it == handlers_.end()) throw Error(errc::kTransportFailure, "no in-process handler bound for '" + r + "'");
    h = it->second;
  }
  auto d = dispatch(r, h, json(request).dump());
  // Round-trip the response through JSON as the wire would.
  d.response = envelope_from_json(json::parse(json(d.response).dump()));
  return d;
}

Delivery Client::exchange(const Envelope& request) {
  const auto* addr = registry_.find(request.to_agent);
  if (!addr) throw Error(errc::kUnknownAgent, "no agent registered as '" + request.to_agent + "'");
  log_->append(request);
  Delivery d = transport_->deliver(request.to_agent, *addr, request);
  log_->append(d.response);
  return d;
}

Delivery Client::send(const Envelope& request) {
  Delivery d = exchange(request);
  if (d.response.kind == MessageKind::kError) {
    const auto code = d.response.payload.value("code", std::string("UNKNOWN"));
    throw Error(errc::kRemoteError, request.to_agent + " returned " + code + ": " +
                                        d.response.payload.value("message", std::string{}),
                d.response.payload);
  }
  return d;
}

// ---- server -------------------------------------------------------------------------

Server::Server(std::string r, Handler handler)
    : role_(std::move(r)), handler_(std::move(handler)), http_(std::make_unique<httplib::Server>()) {
  // Exclusive bind so a second listener on the same port is refused.
  http_->set_socket_options([](socket_t sock) {
    int yes = 1;
    ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
  });
  http_->Post("/a2a", [this](const httplib::Request& req, httplib::Response& res) {
    auto d = dispatch(role_, handler_, req.body);
    ++handled_;
    res.set_header(kHandlerElapsedHeader, std::to_string(d.handler_ms));
    res.set_content(json(d.response).dump(), "application/json");
  });
  http_->Get("/health", [this](const httplib::Request&, httplib::Response& res) {
    res.set_content(json{{"role", role_}, {"status", "ok"}}.dump(), "application/json");
  });
}

Server::~Server() { stop(); }

namespace {

HttpRequest to_request(const httplib::Request& req) {
  HttpRequest out;
  out.body = req.body;
  for (const auto& [k, v] : req.params) out.params[k] = v;
  for (std::size_t i = 1; i < req.matches.size(); ++i) out.matches.push_back(req.matches[i].str());
  return out;
}

void write_reply(const HttpReply& reply, httplib::Response& res) {
  res.status = reply.status;
  res.set_content(reply.body, reply.content_type);
}

}  // namespace

void Server::add_get(const std::string& pattern, RouteHandler h) {
  http_->Get(pattern, [h = std::move(h)](const httplib::Request& req, httplib::Response& res) {
    write_reply(h(to_request(req)), res);
  });
}

void Server::add_post(const std::string& pattern, RouteHandler h) {
  http_->Post(pattern, [h = std::move(h)](const httplib::Request& req, httplib::Response& res) {
    write_reply(h(to_request(req)), res);
  });
}

void Server::start(const std::string& host, int port) {
  if (port == 0) {
    port_ = http_->bind_to_any_port(host);
    if (port_ <= 0) throw Error(errc::kPortInUse, "could not bind an ephemeral port for " + role_);
  } else {
    if (!http_->bind_to_port(host, port)) {
      throw Error(errc::kPortInUse, "port " + std::to_string(port) + " is already in use (" + role_ + ")",
                  {{"port", port}, {"role", role_}});
    }
    port_ = port;
  }
  thread_ = std::thread([this] { http_->listen_after_bind(); });
  http_->wait_until_ready();
}

void Server::stop() {
  if (http_) http_->stop();
  if (thread_.joinable()) thread_.join();
}

std::unique_ptr<Server> serve(const std::string& r, const std::string& host, int port, Handler handler) {
  auto s = std::make_unique<Server>(r, std::move(handler));
  s->start(host, port);
  return s;
}

}  // namespace ibn::a2a

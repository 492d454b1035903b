#pragma once

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

namespace httplib {
class Server;
}

namespace ibn::a2a {

using nlohmann::json;

enum class MessageKind {
  kIntentRequest,
  kProposal,
  kValidationRequest,
  kValidationResult,
  kArbitrationResult,
  kWeights,
  kPolicyRequest,
  kRoutingDecision,
  kDeploymentResult,
  kAck,
  kError,
};

std::string to_string(MessageKind k);
std::optional<MessageKind> parse_message_kind(std::string_view s);

struct Envelope {
  std::string message_id;
  std::string task_id;
  std::string correlation_id;  // empty for requests
  std::string from_agent;
  std::string to_agent;
  MessageKind kind = MessageKind::kAck;
  json payload = json::object();
  std::string timestamp;

  bool is_response() const { return !correlation_id.empty(); }
  bool operator==(const Envelope&) const = default;
};

void to_json(json& j, const Envelope& e);
// Strict: throws BAD_ENVELOPE on any missing or mistyped field.
Envelope envelope_from_json(const json& j);

std::string new_message_id();

Envelope make_request(std::string task_id, std::string from, std::string to, MessageKind kind, json payload);
Envelope make_response(const Envelope& request, MessageKind kind, json payload);
Envelope make_error(const Envelope& request, const std::string& code, const std::string& message,
                    json detail = json::object());

// Role names used across the fleet.
namespace role {
inline constexpr const char* kIntentUi = "intent_ui";
inline constexpr const char* kJunior1 = "junior_1";
inline constexpr const char* kJunior2 = "junior_2";
inline constexpr const char* kSenior = "senior";
inline constexpr const char* kPolicy = "policy";
inline constexpr const char* kMcpState = "mcp_state";
}  // namespace role

struct AgentAddress {
  std::string host = "127.0.0.1";
  int port = 0;
  bool operator==(const AgentAddress&) const = default;
};

class AgentRegistry {
 public:
  // intent_ui 8000, junior_1 8011, junior_2 8012, senior 8013, policy 8014,
  // mcp_state 8015.
  static AgentRegistry defaults();
  static AgentRegistry from_json(const json& j);
  json to_json() const;

  void set(const std::string& role, AgentAddress addr);
  const AgentAddress* find(const std::string& role) const;
  bool contains(const std::string& role) const { return find(role) != nullptr; }
  const std::map<std::string, AgentAddress>& entries() const { return entries_; }

  // Every pipeline role present and no two roles share host:port.
  // Throws CONFIG_INVALID.
  void check() const;

 private:
  std::map<std::string, AgentAddress> entries_;
};

// Append-only envelope store. Appends are serialized; queries copy a
// consistent prefix. When backed by a file, each envelope becomes one JSON
// line; sync() flushes and fsyncs.
class MessageLog {
 public:
  MessageLog() = default;
  explicit MessageLog(const std::filesystem::path& path);
  ~MessageLog();
  MessageLog(const MessageLog&) = delete;
  MessageLog& operator=(const MessageLog&) = delete;

  void append(const Envelope& e);
  std::vector<Envelope> query(const std::string& task_id) const;
  std::vector<Envelope> all() const;
  std::size_t size() const;
  void sync();

  static std::vector<Envelope> load_jsonl(const std::filesystem::path& path);

 private:
  mutable std::shared_mutex mu_;
  std::vector<Envelope> entries_;
  std::FILE* file_ = nullptr;
};

using Handler = std::function<Envelope(const Envelope&)>;

struct Delivery {
  Envelope response;
  double handler_ms = 0.0;  // time spent inside the peer's handler
};

// Validates and dispatches one request body the way an agent endpoint does:
// malformed input and handler failures come back as ERROR envelopes.
Delivery dispatch(const std::string& role, const Handler& handler, const std::string& body);

class Transport {
 public:
  virtual ~Transport() = default;
  virtual Delivery deliver(const std::string& role, const AgentAddress& addr, const Envelope& request) = 0;
};

// POST http://host:port/a2a
class HttpTransport : public Transport {
 public:
  explicit HttpTransport(int timeout_ms = 60000) : timeout_ms_(timeout_ms) {}
  Delivery deliver(const std::string& role, const AgentAddress& addr, const Envelope& request) override;

 private:
  int timeout_ms_;
};

// Calls handlers directly, through the same JSON validation path as HTTP.
class InProcessTransport : public Transport {
 public:
  void bind(const std::string& role, Handler handler);
  Delivery deliver(const std::string& role, const AgentAddress& addr, const Envelope& request) override;

 private:
  std::shared_mutex mu_;
  std::map<std::string, Handler> handlers_;
};

class Client {
 public:
  Client(AgentRegistry registry, std::shared_ptr<Transport> transport, std::shared_ptr<MessageLog> log)
      : registry_(std::move(registry)), transport_(std::move(transport)), log_(std::move(log)) {}

  // Logs the request and the response, then returns the response. Throws
  // UNKNOWN_AGENT, TRANSPORT_FAILURE, or REMOTE_ERROR when the peer answered
  // with kind=ERROR (detail is the peer's error payload, including "code").
  Delivery send(const Envelope& request);
  // Same logging, but ERROR responses are returned rather than thrown.
  Delivery exchange(const Envelope& request);

  const AgentRegistry& registry() const { return registry_; }
  MessageLog& log() { return *log_; }
  std::shared_ptr<MessageLog> log_ptr() const { return log_; }

 private:
  AgentRegistry registry_;
  std::shared_ptr<Transport> transport_;
  std::shared_ptr<MessageLog> log_;
};

struct HttpRequest {
  std::string body;
  std::map<std::string, std::string> params;  // query string
  std::vector<std::string> matches;           // regex captures of the path
};

struct HttpReply {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";
};

using RouteHandler = std::function<HttpReply(const HttpRequest&)>;

// One agent endpoint: POST /a2a, GET /health, plus any extra routes added
// before start().
class Server {
 public:
  Server(std::string role, Handler handler);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  void add_get(const std::string& pattern, RouteHandler h);
  void add_post(const std::string& pattern, RouteHandler h);

  // Binds and starts listening on a background thread. Port 0 picks a free
  // port. Throws PORT_IN_USE.
  void start(const std::string& host, int port);
  void stop();

  int port() const { return port_; }
  const std::string& role() const { return role_; }
  std::size_t handled() const { return handled_.load(); }

 private:
  std::string role_;
  Handler handler_;
  std::unique_ptr<httplib::Server> http_;
  std::thread thread_;
  int port_ = 0;
  std::atomic<std::size_t> handled_{0};
};

std::unique_ptr<Server> serve(const std::string& role, const std::string& host, int port, Handler handler);

}  // namespace ibn::a2a

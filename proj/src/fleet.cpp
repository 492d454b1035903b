#include "ibn/fleet.hpp"

#include <thread>

#include <httplib.h>

#include "ibn/error.hpp"

namespace ibn {

namespace role = a2a::role;

namespace {

const std::vector<std::string>& all_roles() {
  static const std::vector<std::string> roles{role::kIntentUi, role::kJunior1, role::kJunior2,
                                              role::kSenior,   role::kPolicy,  role::kMcpState};
  return roles;
}

std::string audit_path_for(const std::string& base, const std::string& r) {
  if (base.empty()) return {};
  const std::filesystem::path p(base);
  return (p.parent_path() / (p.stem().string() + "." + r + p.extension().string())).string();
}

}  // namespace

a2a::Handler Fleet::wrap(const std::string& r, a2a::Handler inner) {
  return [this, r, inner = std::move(inner)](const a2a::Envelope& e) {
    DelayFn fn;
    {
      std::lock_guard lock(delay_mu_);
      if (const auto it = delays_.find(r); it != delays_.end()) fn = it->second;
    }
    if (fn) {
      if (const double ms = fn(e); ms > 0) std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(ms));
    }
    return inner(e);
  };
}

void Fleet::set_handler_delay(const std::string& r, double ms) {
  set_handler_delay(r, [ms](const a2a::Envelope&) { return ms; });
}

void Fleet::set_handler_delay(const std::string& r, DelayFn fn) {
  std::lock_guard lock(delay_mu_);
  delays_[r] = std::move(fn);
}

std::unique_ptr<Fleet> Fleet::start(const SystemConfig& config, Mode mode, std::set<std::string> local_roles) {
  std::unique_ptr<Fleet> f(new Fleet());
  f->mode_ = mode;
  f->local_ = local_roles.empty() || mode == Mode::kInProcess
                  ? std::set<std::string>(all_roles().begin(), all_roles().end())
                  : std::move(local_roles);
  f->registry_ = config.registry;
  f->registry_.check();
  f->log_ = config.log_path.empty() ? std::make_shared<a2a::MessageLog>()
                                    : std::make_shared<a2a::MessageLog>(config.log_path);
  if (f->hosts(role::kMcpState)) f->store_ = std::make_shared<mcp::StateStore>(config.state_journal_path);

  const auto rules = config.rules();
  for (const auto& r : {role::kJunior1, role::kJunior2, role::kSenior, role::kPolicy}) {
    if (!f->hosts(r)) continue;
    auto backend = make_backend(config.backend, config.endpoint_for(r), rules, config.seed);
    f->gateways_[r] = std::make_shared<ModelGateway>(backend, audit_path_for(config.audit_path, r));
  }

  std::shared_ptr<mcp::McpClient> state_client;
  if (f->store_) {
    state_client = std::make_shared<mcp::LocalMcpClient>(f->store_);
  } else {
    state_client = std::make_shared<mcp::HttpMcpClient>(*f->registry_.find(role::kMcpState));
  }

  std::map<std::string, a2a::Handler> handlers;
  if (f->hosts(role::kJunior1)) {
    f->junior1_ = std::make_shared<JuniorAgent>(role::kJunior1, f->gateways_[role::kJunior1], config.junior);
    handlers[role::kJunior1] = [j = f->junior1_](const a2a::Envelope& e) { return j->handle(e); };
  }
  if (f->hosts(role::kJunior2)) {
    f->junior2_ = std::make_shared<JuniorAgent>(role::kJunior2, f->gateways_[role::kJunior2], config.junior);
    handlers[role::kJunior2] = [j = f->junior2_](const a2a::Envelope& e) { return j->handle(e); };
  }
  if (f->hosts(role::kSenior)) {
    f->senior_ = std::make_shared<SeniorAgent>(f->gateways_[role::kSenior], config.senior);
    handlers[role::kSenior] = [s = f->senior_](const a2a::Envelope& e) { return s->handle(e); };
  }
  if (f->hosts(role::kPolicy)) {
    f->policy_ = std::make_shared<PolicyAgent>(f->gateways_[role::kPolicy], state_client, config.policy);
    handlers[role::kPolicy] = [p = f->policy_](const a2a::Envelope& e) { return p->handle(e); };
  }
  if (f->store_) {
    handlers[role::kMcpState] = [s = f->store_](const a2a::Envelope& e) { return s->handle(e); };
  }

  auto* raw = f.get();
  std::shared_ptr<a2a::Transport> transport;
  if (mode == Mode::kInProcess) {
    auto t = std::make_shared<a2a::InProcessTransport>();
    for (auto& [r, h] : handlers) t->bind(r, raw->wrap(r, h));
    transport = t;
  } else {
    transport = std::make_shared<a2a::HttpTransport>();
    for (auto& [r, h] : handlers) {
      const auto addr = *raw->registry_.find(r);
      auto server = std::make_unique<a2a::Server>(r, raw->wrap(r, h));
      if (r == role::kMcpState) raw->store_->mount(*server);
      server->start(addr.host, addr.port);
      raw->registry_.set(r, {addr.host, server->port()});
      raw->servers_.push_back(std::move(server));
    }
  }

  if (f->hosts(role::kIntentUi)) {
    auto client = std::make_shared<a2a::Client>(f->registry_, transport, f->log_);
    f->orchestrator_ = std::make_shared<Orchestrator>(client, state_client, config.orchestrator);
    if (config.fault_plan) f->orchestrator_->set_fault_plan(*config.fault_plan);
    if (mode == Mode::kHttp) {
      const auto addr = *f->registry_.find(role::kIntentUi);
      auto server = std::make_unique<a2a::Server>(
          role::kIntentUi, [o = f->orchestrator_](const a2a::Envelope& e) { return o->handle(e); });
      f->orchestrator_->mount(*server);
      server->start(addr.host, addr.port);
      f->registry_.set(role::kIntentUi, {addr.host, server->port()});
      f->servers_.push_back(std::move(server));
    }
  }
  return f;
}

Fleet::~Fleet() { stop(); }

void Fleet::stop() {
  if (orchestrator_) orchestrator_->wait_all();
  for (auto& s : servers_) s->stop();
  servers_.clear();
}

bool Fleet::wait_ready(std::chrono::milliseconds timeout) const {
  if (mode_ == Mode::kInProcess) return true;
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  for (const auto& [r, addr] : registry_.entries()) {
    for (;;) {
      httplib::Client cli(addr.host, addr.port);
      cli.set_connection_timeout(std::chrono::milliseconds(200));
      if (auto res = cli.Get("/health"); res && res->status == 200) break;
      if (std::chrono::steady_clock::now() > deadline) return false;
      std::this_thread::sleep_for(std::chrono::milliseconds(20));
    }
  }
  return true;
}

}  // namespace ibn

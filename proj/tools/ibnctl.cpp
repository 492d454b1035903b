// ibnctl: run the agent fleet, submit intents, score corpora, report timing,
// replay logs and compute routes.

#include <atomic>
#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <httplib.h>
#include <json.hpp>

#include "ibn/config.hpp"
#include "ibn/error.hpp"
#include "ibn/fleet.hpp"
#include "ibn/metrics.hpp"
#include "ibn/orchestrator.hpp"
#include "ibn/raas.hpp"

namespace {

using nlohmann::json;

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop = true; }

ibn::SystemConfig config_or_default(const std::string& path) {
  return path.empty() ? ibn::config_from_json(json::object()) : ibn::load_config(path);
}

std::string read_file(const std::string& path, const char* what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ibn::Error(ibn::errc::kBadRequest, std::string("cannot open ") + what + " " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Target {
  std::string host = "127.0.0.1";
  int port = 8000;
};

Target intent_ui_of(const std::string& config_path, const std::string& host, int port) {
  Target t;
  if (!config_path.empty()) {
    const auto cfg = ibn::load_config(config_path);
    const auto* addr = cfg.registry.find(ibn::a2a::role::kIntentUi);
    t.host = addr->host;
    t.port = addr->port;
  }
  if (!host.empty()) t.host = host;
  if (port > 0) t.port = port;
  return t;
}

httplib::Result http_get(const Target& t, const std::string& path) {
  httplib::Client cli(t.host, t.port);
  cli.set_connection_timeout(std::chrono::seconds(2));
  cli.set_read_timeout(std::chrono::seconds(30));
  auto res = cli.Get(path);
  if (!res) {
    throw ibn::Error(ibn::errc::kFleetUnreachable,
                     "no fleet at " + t.host + ":" + std::to_string(t.port) + " (" + httplib::to_string(res.error()) + ")");
  }
  return res;
}

int cmd_serve(const std::string& config_path, const std::vector<std::string>& roles, bool once) {
  const auto cfg = ibn::load_config(config_path);
  const std::set<std::string> local(roles.begin(), roles.end());
  auto fleet = ibn::Fleet::start(cfg, ibn::Fleet::Mode::kHttp, local);
  if (!fleet->wait_ready(std::chrono::seconds(10))) {
    std::cerr << "error: fleet did not become ready\n";
    return 1;
  }
  std::cout << "ready:";
  for (const auto& [r, addr] : fleet->registry().entries()) {
    if (fleet->hosts(r)) std::cout << ' ' << r << '=' << addr.host << ':' << addr.port;
  }
  std::cout << std::endl;
  if (once) return 0;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  fleet->stop();
  return 0;
}

int cmd_intent(const Target& t, const std::string& text, bool wait, int timeout_s) {
  httplib::Client cli(t.host, t.port);
  cli.set_connection_timeout(std::chrono::seconds(2));
  auto res = cli.Post("/intent", json{{"text", text}}.dump(), "application/json");
  if (!res) {
    throw ibn::Error(ibn::errc::kFleetUnreachable,
                     "no fleet at " + t.host + ":" + std::to_string(t.port) + " (" + httplib::to_string(res.error()) + ")");
  }
  const auto body = json::parse(res->body, nullptr, false);
  if (res->status != 202 || body.is_discarded() || !body.contains("task_id")) {
    std::cerr << "error: " << res->body << '\n';
    return 1;
  }
  const auto task_id = body["task_id"].get<std::string>();
  if (!wait) {
    std::cout << task_id << '\n';
    return 0;
  }
  const auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(timeout_s);
  while (std::chrono::steady_clock::now() < deadline) {
    auto r = http_get(t, "/intent/" + task_id);
    const auto rec = json::parse(r->body);
    if (rec.value("status", std::string("RUNNING")) != "RUNNING") {
      std::cout << rec.dump(2) << '\n';
      return rec["status"] == "COMPLETED" ? 0 : 3;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
  }
  std::cerr << "error: " << task_id << " still running after " << timeout_s << " s\n";
  return 1;
}

int cmd_run(const std::string& config_path, const std::string& text) {
  const auto cfg = config_or_default(config_path);
  auto fleet = ibn::Fleet::start(cfg, ibn::Fleet::Mode::kInProcess);
  const auto rec = fleet->orchestrator().run_pipeline(text, "cli");
  std::cout << json(rec).dump(2) << '\n';
  return rec.status == ibn::PipelineStatus::kCompleted ? 0 : 3;
}

int cmd_bench(const std::string& corpus_path, const std::string& metrics, const std::string& out_path) {
  const auto rows = ibn::metrics::parse_corpus(read_file(corpus_path, "corpus"));
  json report{{"corpus", corpus_path}, {"rows", rows.size()}, {"metrics", json::array()}};
  std::stringstream ss(metrics);
  for (std::string m; std::getline(ss, m, ',');) {
    if (m.empty()) continue;
    report["metrics"].push_back(ibn::metrics::metric_report(rows, ibn::metrics::parse_metric_kind(m)));
  }
  const auto text = report.dump(2) + "\n";
  if (out_path.empty() || out_path == "-") {
    std::cout << text;
  } else {
    std::ofstream(out_path, std::ios::binary) << text;
  }
  return 0;
}

int cmd_report_timing(const Target& t, int iterations) {
  auto res = http_get(t, "/report/timing?iterations=" + std::to_string(iterations));
  const auto body = json::parse(res->body);
  if (res->status != 200) {
    std::cerr << "error: " << body.value("code", std::string{}) << ": " << body.value("message", std::string{}) << '\n';
    return 1;
  }
  // Table layout: one row per role, one column per iteration.
  std::cout << "role";
  for (const auto& it : body["iterations"]) std::cout << "\titer" << it["iteration"].get<int>();
  std::cout << '\n';
  for (const char* r : {"intent_ui", "junior_both", "senior", "policy"}) {
    std::cout << r;
    for (const auto& it : body["iterations"]) std::cout << '\t' << it["percentages"][r].get<double>();
    std::cout << '\n';
  }
  std::cout << "total_ms";
  for (const auto& it : body["iterations"]) std::cout << '\t' << it["total_ms"].get<double>();
  std::cout << '\n';
  return 0;
}

int cmd_log_replay(const std::string& log_path, const std::string& task_id, bool envelopes) {
  const auto log = ibn::a2a::MessageLog::load_jsonl(log_path);
  std::vector<ibn::a2a::Envelope> mine;
  for (const auto& e : log) {
    if (e.task_id == task_id) mine.push_back(e);
  }
  if (mine.empty()) {
    std::cerr << "error: no envelopes for " << task_id << " in " << log_path << '\n';
    return 1;
  }
  json out{{"task_id", task_id}, {"envelope_count", mine.size()}, {"phase_results", ibn::replay_phase_results(log, task_id)}};
  if (envelopes) out["envelopes"] = mine;
  std::cout << out.dump(2) << '\n';
  return 0;
}

int cmd_route(const std::string& topology_path, const std::string& src, const std::string& dst,
              const std::string& strategy_name, const std::string& service) {
  const auto doc = json::parse(read_file(topology_path, "topology"));
  const auto spec = doc.contains("spec") ? doc["spec"].get<ibn::TopologySpec>() : doc.get<ibn::TopologySpec>();
  const auto strategy = ibn::parse_routing_strategy(strategy_name);
  if (!strategy) throw ibn::Error(ibn::errc::kBadRequest, "strategy must be SPF or DUAL");

  ibn::PolicySettings policy;
  const auto svc = ibn::parse_service_type(service);
  if (!svc) throw ibn::Error(ibn::errc::kBadRequest, "unknown service type '" + service + "'");
  const auto& profile = policy.profiles.at(*svc);
  ibn::RoutingDecision decision{*strategy, profile.metric, profile.coefficients.normalized(), "cli"};

  const auto split = ibn::raas::split_domains(spec);
  const auto global = ibn::raas::aggregate_domains(split.domains, split.inter_links);
  const auto& g = global.graph;
  // Plain node ids are accepted and mapped to their domain-prefixed form.
  auto resolve = [&](const std::string& id) {
    if (g.index_of(id)) return id;
    if (const auto* n = spec.find_node(id)) return ibn::raas::global_id(n->domain_id, id);
    throw ibn::Error(ibn::errc::kUnknownNode, "no node '" + id + "'");
  };
  const auto s = resolve(src);
  const auto d = resolve(dst);
  ibn::raas::CostModel cost{decision.coefficients, decision.metric, 0.0, {}};
  const ibn::raas::AllTrees trees(g, cost);
  const auto raw = *strategy == ibn::RoutingStrategy::kDual ? trees.dual_path(s, d) : trees.from(s).path_to(d);
  if (raw.empty()) {
    std::cerr << "error: " << dst << " unreachable from " << src << '\n';
    return 1;
  }
  const auto path = ibn::raas::splice_pseudo_node(raw, global);
  json out{{"strategy", ibn::to_string(*strategy)},
           {"metric", ibn::to_string(decision.metric)},
           {"src", s},
           {"dst", d},
           {"path", path},
           {"cost", trees.from(s).distance_to(d)},
           {"flow_entries", ibn::raas::paths_to_flow_entries(path, g)},
           {"route_maps", ibn::raas::paths_to_route_maps(path, g)}};
  if (*strategy == ibn::RoutingStrategy::kDual) {
    const auto table = trees.dual(s);
    out["route"] = *table.find(d);
  }
  std::cout << out.dump(2) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Intent-based networking agent fleet"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> roles;
  bool once = false;
  auto* serve = app.add_subcommand("serve", "Start the agent fleet over HTTP");
  serve->add_option("--config", config_path, "Config JSON")->required();
  serve->add_option("--role", roles, "Host only these roles (repeatable)");
  serve->add_flag("--once", once, "Exit right after the readiness line");

  std::string text;
  bool wait = false;
  std::string host;
  int port = 0;
  int timeout_s = 60;
  auto* intent = app.add_subcommand("intent", "Submit an intent to a running fleet");
  intent->add_flag("--wait", wait, "Wait for the final record");
  intent->add_option("--config", config_path, "Config JSON (for the intent_ui address)");
  intent->add_option("--host", host, "intent_ui host");
  intent->add_option("--port", port, "intent_ui port");
  intent->add_option("--timeout", timeout_s, "Seconds to wait with --wait");
  intent->add_option("text", text, "Intent text")->required();

  auto* run = app.add_subcommand("run", "Run one intent through an in-process fleet");
  run->add_option("--config", config_path, "Config JSON (defaults when omitted)");
  run->add_option("text", text, "Intent text")->required();

  std::string corpus;
  std::string metrics = "bleu2,meteor,rougeL";
  std::string out_path;
  auto* bench = app.add_subcommand("bench", "Score a candidate/reference corpus");
  bench->add_option("--corpus", corpus, "JSONL corpus")->required();
  bench->add_option("--metrics", metrics, "Comma-separated: bleu2,meteor,rougeL");
  bench->add_option("--out", out_path, "Report path (stdout when omitted)");

  int iterations = 3;
  auto* report = app.add_subcommand("report", "Reports from a running fleet");
  report->require_subcommand(1);
  auto* timing = report->add_subcommand("timing", "Per-agent time distribution");
  timing->add_option("--iterations", iterations, "Number of iterations");
  timing->add_option("--config", config_path, "Config JSON (for the intent_ui address)");
  timing->add_option("--host", host, "intent_ui host");
  timing->add_option("--port", port, "intent_ui port");

  std::string task_id;
  std::string log_path;
  bool envelopes = false;
  auto* log = app.add_subcommand("log", "Message log tools");
  log->require_subcommand(1);
  auto* replay = log->add_subcommand("replay", "Rebuild a task's phase results from the log");
  replay->add_option("--task", task_id, "Task id")->required();
  replay->add_option("--log", log_path, "Message log (JSONL)");
  replay->add_option("--config", config_path, "Config JSON (for log_path)");
  replay->add_flag("--envelopes", envelopes, "Also print the envelopes");

  std::string topology_path;
  std::string src;
  std::string dst;
  std::string strategy = "SPF";
  std::string service = "URLLC";
  auto* route = app.add_subcommand("route", "Routing engine");
  route->require_subcommand(1);
  auto* compute = route->add_subcommand("compute", "Compute one path and its entries");
  compute->add_option("--topology", topology_path, "TopologySpec or WeightedTopology JSON")->required();
  compute->add_option("--src", src, "Source node")->required();
  compute->add_option("--dst", dst, "Destination node")->required();
  compute->add_option("--strategy", strategy, "SPF or DUAL");
  compute->add_option("--service", service, "Service type whose policy coefficients are used");

  auto* defaults = app.add_subcommand("config", "Print the default configuration");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*serve) return cmd_serve(config_path, roles, once);
    if (*intent) return cmd_intent(intent_ui_of(config_path, host, port), text, wait, timeout_s);
    if (*run) return cmd_run(config_path, text);
    if (*bench) return cmd_bench(corpus, metrics, out_path);
    if (*timing) return cmd_report_timing(intent_ui_of(config_path, host, port), iterations);
    if (*replay) {
      if (log_path.empty() && !config_path.empty()) log_path = ibn::load_config(config_path).log_path;
      if (log_path.empty()) throw ibn::Error(ibn::errc::kBadRequest, "give --log or a config with log_path");
      return cmd_log_replay(log_path, task_id, envelopes);
    }
    if (*compute) return cmd_route(topology_path, src, dst, strategy, service);
    if (*defaults) {
      std::cout << ibn::config_to_json(ibn::config_from_json(json::object())).dump(2) << '\n';
      return 0;
    }
  } catch (const ibn::Error& e) {
    std::cerr << "error: " << e.what();
    if (!e.detail().empty()) std::cerr << ' ' << e.detail().dump();
    std::cerr << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}

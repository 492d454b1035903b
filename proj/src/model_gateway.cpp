#include "ibn/model_gateway.hpp"

#include <cctype>
#include <chrono>
#include <regex>
#include <thread>

#include <httplib.h>

#include "ibn/domain.hpp"
#include "ibn/error.hpp"
#include "ibn/rng.hpp"

namespace ibn {

namespace {

bool is_ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool is_ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

// Finds "{name}" at position i; returns name length (0 if not a marker).
std::size_t marker_at(const std::string& s, std::size_t i) {
  if (s[i] != '{' || i + 1 >= s.size() || !is_ident_start(s[i + 1])) return 0;
  std::size_t j = i + 1;
  while (j < s.size() && is_ident_char(s[j])) ++j;
  if (j >= s.size() || s[j] != '}') return 0;
  return j - i - 1;
}

std::string normalize_words(std::string_view text) {
  std::string out = " ";
  for (char c : text) {
    const auto u = static_cast<unsigned char>(c);
    if (std::isalnum(u) || c == '_') {
      out.push_back(static_cast<char>(std::tolower(u)));
    } else if (out.back() != ' ') {
      out.push_back(' ');
    }
  }
  if (out.back() != ' ') out.push_back(' ');
  return out;
}

bool has_phrase(const std::string& normalized_text, const std::string& phrase) {
  const auto needle = normalize_words(phrase);
  return needle.size() > 2 && normalized_text.find(needle) != std::string::npos;
}

}  // namespace

void ModelEndpoint::check() const {
  static const std::regex url_re(R"(^https?://[A-Za-z0-9.\-]+(:[0-9]+)?(/.*)?$)");
  if (!std::regex_match(base_url, url_re)) throw Error(errc::kConfigInvalid, "malformed base_url '" + base_url + "'");
  if (model_name.empty()) throw Error(errc::kConfigInvalid, "model_name is empty");
  if (timeout_ms <= 0) throw Error(errc::kConfigInvalid, "timeout_ms must be positive");
  if (max_retries_on_parse < 0) throw Error(errc::kConfigInvalid, "max_retries_on_parse must be >= 0");
}

void PromptTemplate::check() const {
  for (const auto& name : required_placeholders) {
    const auto marker = "{" + name + "}";
    std::size_t count = 0;
    for (auto pos = template_text.find(marker); pos != std::string::npos; pos = template_text.find(marker, pos + 1)) {
      ++count;
    }
    if (count != 1) {
      throw Error(errc::kConfigInvalid, "placeholder {" + name + "} must appear exactly once in template '" + role + "'");
    }
  }
}

std::string render_prompt(const PromptTemplate& tpl, const json& context) {
  for (const auto& name : tpl.required_placeholders) {
    if (!context.is_object() || !context.contains(name)) {
      throw Error(errc::kMissingPlaceholder, "no value for placeholder '" + name + "'", {{"key", name}});
    }
  }
  const auto& text = tpl.template_text;
  std::string out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < text.size();) {
    const auto len = marker_at(text, i);
    if (len == 0) {
      out.push_back(text[i++]);
      continue;
    }
    const auto name = text.substr(i + 1, len);
    if (!context.is_object() || !context.contains(name)) {
      throw Error(errc::kMissingPlaceholder, "no value for placeholder '" + name + "'", {{"key", name}});
    }
    const auto& v = context.at(name);
    out += v.is_string() ? v.get<std::string>() : v.dump();
    i += len + 2;
  }
  return out;
}

// ---- mock ---------------------------------------------------------------------

MockBackend::MockBackend(json rules, std::uint64_t seed) : rules_(std::move(rules)), seed_(seed) {
  if (!rules_.is_object() || !rules_.contains("rules") || !rules_["rules"].is_array()) {
    throw Error(errc::kConfigInvalid, "mock rule table needs a 'rules' array");
  }
}

MockBackend MockBackend::from_file(const std::filesystem::path& path, std::uint64_t seed) {
  std::ifstream in(path);
  if (!in) throw Error(errc::kConfigInvalid, "cannot open mock rule table " + path.string());
  try {
    return MockBackend(json::parse(in), seed);
  } catch (const json::parse_error& e) {
    throw Error(errc::kConfigInvalid, "mock rule table " + path.string() + ": " + e.what());
  }
}

const json& MockBackend::default_rules() {
  static const json rules = json::parse(
#include "mock_rules.inc"
  );
  return rules;
}

std::string MockBackend::complete(const std::string& prompt) {
  const auto text = normalize_words(prompt);
  // when_any only looks past the scope marker, so instruction text in a
  // template cannot trigger keyword rules.
  auto scoped = text;
  if (const auto marker = rules_.value("scope_marker", std::string{}); !marker.empty()) {
    if (const auto pos = prompt.rfind(marker); pos != std::string::npos) {
      scoped = normalize_words(std::string_view(prompt).substr(pos + marker.size()));
    }
  }
  for (const auto& rule : rules_["rules"]) {
    bool ok = true;
    for (const auto& p : rule.value("when_all", json::array())) ok = ok && has_phrase(text, p.get<std::string>());
    if (!ok) continue;
    const auto any = rule.value("when_any", json::array());
    if (!any.empty()) {
      ok = false;
      for (const auto& p : any) ok = ok || has_phrase(scoped, p.get<std::string>());
    }
    if (!ok) continue;

    if (const int delay = rule.value("delay_ms", 0); delay > 0) {
      std::this_thread::sleep_for(std::chrono::milliseconds(delay));
    }
    json response;
    if (rule.contains("responses") && rule["responses"].is_array() && !rule["responses"].empty()) {
      const auto& options = rule["responses"];
      response = options[(stable_hash(prompt) ^ seed_) % options.size()];
    } else {
      response = rule.value("response", json(""));
    }
    if (response.is_string()) return response.get<std::string>();

    if (rule.value("extract", false)) {
      for (const auto& ex : rules_.value("extractors", json::array())) {
        const std::regex re(ex.at("pattern").get<std::string>(), std::regex::icase);
        std::smatch m;
        const auto field = ex.at("field").get<std::string>();
        if (!response.contains(field) && std::regex_search(prompt, m, re)) {
          response[field] = std::stoi(m[1].str());
        }
      }
    }
    const auto body = response.dump();
    return rule.value("fenced", false) ? "```json\n" + body + "\n```" : body;
  }
  return rules_.value("default_response", std::string{});
}

// ---- remote -------------------------------------------------------------------

RemoteBackend::RemoteBackend(ModelEndpoint endpoint) : endpoint_(std::move(endpoint)) {
  endpoint_.check();
  const auto scheme_end = endpoint_.base_url.find("://");
  const auto path_start = endpoint_.base_url.find('/', scheme_end + 3);
  origin_ = endpoint_.base_url.substr(0, path_start);
  path_prefix_ = path_start == std::string::npos ? "" : endpoint_.base_url.substr(path_start);
  while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
}

std::string RemoteBackend::complete(const std::string& prompt) {
  httplib::Client cli(origin_);
  const auto timeout = std::chrono::milliseconds(endpoint_.timeout_ms);
  cli.set_connection_timeout(timeout);
  cli.set_read_timeout(timeout);
  cli.set_write_timeout(timeout);

  const json body{{"model", endpoint_.model_name},
                  {"messages", json::array({{{"role", "user"}, {"content", prompt}}})},
                  {"stream", false}};
  auto res = cli.Post(path_prefix_ + "/chat/completions", body.dump(), "application/json");
  if (!res) {
    const auto err = res.error();
    if (err == httplib::Error::Read || err == httplib::Error::ConnectionTimeout) {
      throw Error(errc::kBackendTimeout, endpoint_.base_url + " did not answer within " +
                                             std::to_string(endpoint_.timeout_ms) + " ms");
    }
    throw Error(errc::kBackendUnreachable, endpoint_.base_url + ": " + httplib::to_string(err));
  }
  if (res->status >= 300) {
    throw Error(errc::kBackendHttpError, "HTTP " + std::to_string(res->status) + " from " + endpoint_.base_url,
                {{"status", res->status}});
  }
  try {
    const auto j = json::parse(res->body);
    return j.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception& e) {
    throw Error(errc::kBackendHttpError, std::string("unexpected chat-completion body: ") + e.what(),
                {{"status", res->status}});
  }
}

// ---- parsing ------------------------------------------------------------------

json parse_structured(const std::string& raw_text, const std::set<std::string>& expected_fields) {
  for (std::size_t start = raw_text.find('{'); start != std::string::npos; start = raw_text.find('{', start + 1)) {
    // Find the matching close brace, skipping string literals.
    int depth = 0;
    bool in_string = false;
    bool escaped = false;
    std::size_t end = std::string::npos;
    for (std::size_t i = start; i < raw_text.size(); ++i) {
      const char c = raw_text[i];
      if (in_string) {
        if (escaped) {
          escaped = false;
        } else if (c == '\\') {
          escaped = true;
        } else if (c == '"') {
          in_string = false;
        }
        continue;
      }
      if (c == '"') {
        in_string = true;
      } else if (c == '{') {
        ++depth;
      } else if (c == '}' && --depth == 0) {
        end = i;
        break;
      }
    }
    if (end == std::string::npos) continue;
    auto doc = json::parse(raw_text.begin() + static_cast<std::ptrdiff_t>(start),
                           raw_text.begin() + static_cast<std::ptrdiff_t>(end + 1), nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) continue;
    for (const auto& f : expected_fields) {
      if (!doc.contains(f)) throw Error(errc::kMissingField, "structured output lacks '" + f + "'", {{"field", f}});
    }
    return doc;
  }
  throw Error(errc::kNoJsonFound, "no JSON object in model output");
}

// ---- gateway ------------------------------------------------------------------

ModelGateway::ModelGateway(std::shared_ptr<ModelBackend> backend, std::filesystem::path audit_path)
    : backend_(std::move(backend)), audit_path_(std::move(audit_path)) {
  if (!audit_path_.empty()) audit_file_.open(audit_path_, std::ios::app);
}

GenerationResult ModelGateway::generate(const std::string& prompt) {
  if (prompt.empty()) throw Error(errc::kEmptyInput, "prompt must not be empty");
  const auto t0 = std::chrono::steady_clock::now();
  GenerationResult out;
  out.backend_id = backend_->id();
  out.raw_text = backend_->complete(prompt);
  out.latency_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();

  json entry{{"timestamp", utc_now_iso()},
             {"backend", out.backend_id},
             {"prompt", prompt},
             {"response", out.raw_text},
             {"latency_ms", out.latency_ms}};
  std::lock_guard lock(mu_);
  if (audit_file_) audit_file_ << entry.dump() << '\n' << std::flush;
  audit_.push_back(std::move(entry));
  return out;
}

StructuredResult ModelGateway::generate_structured(const std::string& prompt,
                                                   const std::set<std::string>& expected_fields,
                                                   int max_retries_on_parse) {
  StructuredResult out;
  std::string current = prompt;
  for (int attempt = 0;; ++attempt) {
    out.generations.push_back(generate(current));
    try {
      out.document = parse_structured(out.generations.back().raw_text, expected_fields);
      return out;
    } catch (const Error& e) {
      if (attempt >= max_retries_on_parse) throw;
      std::string fields;
      for (const auto& f : expected_fields) fields += (fields.empty() ? "" : ", ") + f;
      current = prompt + "\n\nThe previous reply could not be used (" + e.code() +
                "). Reply with exactly one JSON object containing the fields: " + fields + ".";
    }
  }
}

std::vector<json> ModelGateway::audit_entries() const {
  std::lock_guard lock(mu_);
  return audit_;
}

std::shared_ptr<ModelBackend> make_backend(const std::string& kind, const ModelEndpoint& endpoint,
                                           const json& mock_rules, std::uint64_t seed) {
  if (kind == "mock") return std::make_shared<MockBackend>(mock_rules, seed);
  if (kind == "remote") return std::make_shared<RemoteBackend>(endpoint);
  throw Error(errc::kConfigInvalid, "unknown backend '" + kind + "' (expected mock or remote)");
}

}  // namespace ibn

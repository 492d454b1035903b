#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

namespace ibn {

using nlohmann::json;

struct ModelEndpoint {
  std::string base_url;  // e.g. http://127.0.0.1:8000/v1
  std::string model_name;
  int timeout_ms = 30000;
  int max_retries_on_parse = 2;

  void check() const;  // throws CONFIG_INVALID
};

struct PromptTemplate {
  std::string role;
  std::string template_text;  // placeholders written as {name}
  std::set<std::string> required_placeholders;

  void check() const;  // every required placeholder appears exactly once
};

// Substitutes {name} markers from `context` in one pass. String values are
// inserted verbatim, anything else as compact JSON. Throws
// MISSING_PLACEHOLDER (detail {"key": name}) for any marker left unfilled.
std::string render_prompt(const PromptTemplate& tpl, const json& context);

struct GenerationResult {
  std::string raw_text;
  double latency_ms = 0.0;
  std::string backend_id;
};

class ModelBackend {
 public:
  virtual ~ModelBackend() = default;
  virtual std::string complete(const std::string& prompt) = 0;
  virtual std::string id() const = 0;
};

// Keyword rule table. Rules are tried in order; the first whose `when_all`
// phrases are all present and at least one `when_any` phrase (if any are
// listed) is present produces the response. Phrases match on word
// boundaries after lowercasing and folding punctuation to spaces.
//
//   {"rules": [{"name", "when_all": [...], "when_any": [...],
//               "response": <object|string>, "responses": [...],
//               "extract": true, "fenced": true, "delay_ms": 0}],
//    "extractors": [{"field", "pattern"}],
//    "default_response": "..."}
//
// With several `responses`, the pick is a pure function of (prompt, seed).
class MockBackend : public ModelBackend {
 public:
  MockBackend(json rules, std::uint64_t seed);

  static MockBackend from_file(const std::filesystem::path& path, std::uint64_t seed);
  static const json& default_rules();

  std::string complete(const std::string& prompt) override;
  std::string id() const override { return "mock"; }

 private:
  json rules_;
  std::uint64_t seed_;
};

// OpenAI-style chat completion over HTTP POST {base}/chat/completions.
class RemoteBackend : public ModelBackend {
 public:
  explicit RemoteBackend(ModelEndpoint endpoint);

  std::string complete(const std::string& prompt) override;
  std::string id() const override { return "remote:" + endpoint_.model_name; }

 private:
  ModelEndpoint endpoint_;
  std::string origin_;  // scheme://host:port
  std::string path_prefix_;
};

// Returns the first syntactically valid JSON object in `raw_text`, fenced or
// bare. Throws NO_JSON_FOUND or MISSING_FIELD (detail {"field": name}).
json parse_structured(const std::string& raw_text, const std::set<std::string>& expected_fields);

struct StructuredResult {
  json document;
  std::vector<GenerationResult> generations;  // one per model call
};

// Thread-safe front end over one backend. Every call is timed and appended
// to an audit trail (kept in memory, mirrored to a JSON Lines file when a
// path is set).
class ModelGateway {
 public:
  explicit ModelGateway(std::shared_ptr<ModelBackend> backend, std::filesystem::path audit_path = {});

  GenerationResult generate(const std::string& prompt);

  // Generates and parses; on a parse failure re-generates with a repair
  // instruction appended, at most `max_retries_on_parse` extra times, then
  // rethrows the last parse error.
  StructuredResult generate_structured(const std::string& prompt, const std::set<std::string>& expected_fields,
                                       int max_retries_on_parse);

  std::vector<json> audit_entries() const;
  const std::string backend_id() const { return backend_->id(); }

 private:
  std::shared_ptr<ModelBackend> backend_;
  std::filesystem::path audit_path_;
  mutable std::mutex mu_;
  std::vector<json> audit_;
  std::ofstream audit_file_;
};

std::shared_ptr<ModelBackend> make_backend(const std::string& kind, const ModelEndpoint& endpoint,
                                           const json& mock_rules, std::uint64_t seed);

}  // namespace ibn

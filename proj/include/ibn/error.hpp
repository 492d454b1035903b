#pragma once

#include <stdexcept>
#include <string>

#include <json.hpp>

namespace ibn {

// Error codes travel over the wire inside ERROR envelopes, so they are plain
// strings rather than an enum.
namespace errc {
inline constexpr const char* kEmptyCorpus = "EMPTY_CORPUS";
inline constexpr const char* kConfigInvalid = "CONFIG_INVALID";
inline constexpr const char* kEmptyInput = "EMPTY_INPUT";
inline constexpr const char* kMissingPlaceholder = "MISSING_PLACEHOLDER";
inline constexpr const char* kBackendUnreachable = "BACKEND_UNREACHABLE";
inline constexpr const char* kBackendTimeout = "BACKEND_TIMEOUT";
inline constexpr const char* kBackendHttpError = "BACKEND_HTTP_ERROR";
inline constexpr const char* kNoJsonFound = "NO_JSON_FOUND";
inline constexpr const char* kMissingField = "MISSING_FIELD";
inline constexpr const char* kUnknownAgent = "UNKNOWN_AGENT";
inline constexpr const char* kTransportFailure = "TRANSPORT_FAILURE";
inline constexpr const char* kRemoteError = "REMOTE_ERROR";
inline constexpr const char* kPortInUse = "PORT_IN_USE";
inline constexpr const char* kBadEnvelope = "BAD_ENVELOPE";
inline constexpr const char* kIntentEmpty = "INTENT_EMPTY";
inline constexpr const char* kBadSize = "BAD_SIZE";
inline constexpr const char* kIntentMismatch = "INTENT_MISMATCH";
inline constexpr const char* kValidationExhausted = "VALIDATION_EXHAUSTED";
inline constexpr const char* kStateUnavailable = "STATE_UNAVAILABLE";
inline constexpr const char* kDuplicateDomainId = "DUPLICATE_DOMAIN_ID";
inline constexpr const char* kBrokenPath = "BROKEN_PATH";
inline constexpr const char* kUnknownNode = "UNKNOWN_NODE";
inline constexpr const char* kNoTopology = "NO_TOPOLOGY";
inline constexpr const char* kInstantiationFailed = "INSTANTIATION_FAILED";
inline constexpr const char* kNoRecords = "NO_RECORDS";
inline constexpr const char* kFleetUnreachable = "FLEET_UNREACHABLE";
inline constexpr const char* kCorpusInvalid = "CORPUS_INVALID";
inline constexpr const char* kBadRequest = "BAD_REQUEST";
}  // namespace errc

class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message, nlohmann::json detail = nlohmann::json::object())
      : std::runtime_error(code + ": " + message), code_(std::move(code)), detail_(std::move(detail)) {}

  const std::string& code() const noexcept { return code_; }
  const nlohmann::json& detail() const noexcept { return detail_; }

 private:
  std::string code_;
  nlohmann::json detail_;
};

}  // namespace ibn

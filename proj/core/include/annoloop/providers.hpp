// Copyright 2026 The Annoloop Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <semaphore>
#include <string>
#include <string_view>
#include <variant>

// One chat-completion contract over several wire dialects, with retry and
// failure classification. Everything downstream of ChatClient is dialect-blind.
namespace annoloop::providers {

enum class ProviderKind { kOpenAICompatible, kNativeJson, kMock };

std::string_view to_string(ProviderKind kind) noexcept;
std::optional<ProviderKind> provider_kind_from_string(std::string_view s) noexcept;

struct ModelSpec {
  ProviderKind kind = ProviderKind::kMock;
  // Endpoint root for HTTP dialects; fixture file path for the mock.
  std::string base_url;
  std::string model_id;
  // Name of the environment variable holding the key. Never the key itself.
  std::string api_key_ref;
  double temperature = 0.0;
  std::int64_t max_output_tokens = 8192;
  std::int64_t timeout_ms = 120000;
  bool json_mode = true;
  int max_concurrency = 4;
};

// Throws Error(kConfigError).
void validate(const ModelSpec& spec);

struct ChatRequest {
  std::string system;
  std::string user;
  bool json_mode = true;
};

enum class FinishReason { kStop, kLength, kOther };

std::string_view to_string(FinishReason r) noexcept;

struct RawResponse {
  std::string body_text;      // the model's message content
  FinishReason finish_reason = FinishReason::kStop;
  int http_status = 200;
  std::optional<std::int64_t> prompt_tokens;
  std::optional<std::int64_t> output_tokens;
  std::string wire_body;      // full HTTP payload when one exists
};

enum class ErrorClass {
  kQuotaExceeded,
  kTruncated,
  kNetworkError,
  kAuthError,
  kMalformedResponse,
  kTimeout,
};

std::string_view to_string(ErrorClass c) noexcept;
std::optional<ErrorClass> error_class_from_string(std::string_view s) noexcept;

// Quota, network, timeout and truncation are retried; auth failures and
// malformed responses are not.
bool is_retryable(ErrorClass c) noexcept;

struct ProviderError {
  ErrorClass error_class;
  std::string detail;
  bool retryable = false;
};

ProviderError make_error(ErrorClass c, std::string detail);

struct RetryPolicy {
  int max_attempts = 4;
  std::int64_t base_delay_ms = 500;
  double backoff_factor = 2.0;
  double jitter_fraction = 0.2;
};

// Throws Error(kConfigError).
void validate(const RetryPolicy& policy);

// Delay before attempt `attempt + 1` after attempt `attempt` (1-based) failed:
// base * factor^(attempt-1) scaled by (1 + jitter * unit), unit in [-1, 1].
std::chrono::milliseconds backoff_delay(const RetryPolicy& policy, int attempt, double unit);

// Transport-level failure, before any HTTP status exists.
struct TransportFailure {
  ErrorClass error_class;  // kNetworkError or kTimeout
  std::string detail;
};

using TransportResult = std::variant<RawResponse, TransportFailure>;

// 429 -> quota; 401/403 -> auth; 408 -> timeout; other 5xx -> network;
// other non-2xx -> malformed; finish=length -> truncated; empty body ->
// malformed; otherwise no failure.
std::optional<ErrorClass> classify_failure(const RawResponse& response) noexcept;
ErrorClass classify_failure(const TransportFailure& failure) noexcept;

class Transport {
 public:
  virtual ~Transport() = default;
  virtual TransportResult send(const ModelSpec& spec, const ChatRequest& request) = 0;
};

struct AttemptRecord {
  int attempt = 0;
  std::optional<RawResponse> response;
  std::optional<ProviderError> error;
  // Backoff slept after this attempt; zero when no retry follows.
  std::chrono::milliseconds next_delay{0};
};

using AttemptObserver = std::function<void(const AttemptRecord&)>;

struct CompletionResult {
  std::optional<RawResponse> response;  // set on success
  std::optional<ProviderError> error;   // set on terminal failure
  int attempts = 0;

  bool ok() const noexcept { return response.has_value(); }
};

struct ClientOptions {
  std::function<void(std::chrono::milliseconds)> sleep;  // defaults to sleep_for
  std::uint64_t jitter_seed = std::random_device{}();
};

// Shareable across worker threads. In-flight requests are capped at
// ModelSpec::max_concurrency.
class ChatClient {
 public:
  ChatClient(ModelSpec spec, std::shared_ptr<Transport> transport, ClientOptions options = {});

  ChatClient(const ChatClient&) = delete;
  ChatClient& operator=(const ChatClient&) = delete;

  CompletionResult complete(const ChatRequest& request, const RetryPolicy& policy,
                            const AttemptObserver& observer = {});

  const ModelSpec& spec() const noexcept { return spec_; }

 private:
  double next_jitter_unit();

  ModelSpec spec_;
  std::shared_ptr<Transport> transport_;
  std::function<void(std::chrono::milliseconds)> sleep_;
  std::counting_semaphore<> slots_;
  std::mutex rng_mu_;
  std::mt19937_64 rng_;
};

// Transport chosen by spec.kind: HTTP dialects or a mock loaded from the
// fixture file named by spec.base_url.
std::shared_ptr<Transport> make_transport(const ModelSpec& spec);

}  // namespace annoloop::providers

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

#include "annoloop/providers.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "annoloop/error.hpp"
#include "annoloop/http_transport.hpp"
#include "annoloop/mock_provider.hpp"

namespace annoloop::providers {

std::string_view to_string(ProviderKind kind) noexcept {
  switch (kind) {
    case ProviderKind::kOpenAICompatible: return "openai_compatible";
    case ProviderKind::kNativeJson: return "native_json";
    case ProviderKind::kMock: return "mock";
  }
  return "unknown";
}

std::optional<ProviderKind> provider_kind_from_string(std::string_view s) noexcept {
  if (s == "openai_compatible") return ProviderKind::kOpenAICompatible;
  if (s == "native_json") return ProviderKind::kNativeJson;
  if (s == "mock") return ProviderKind::kMock;
  return std::nullopt;
}

std::string_view to_string(FinishReason r) noexcept {
  switch (r) {
    case FinishReason::kStop: return "stop";
    case FinishReason::kLength: return "length";
    case FinishReason::kOther: return "other";
  }
  return "other";
}

std::string_view to_string(ErrorClass c) noexcept {
  switch (c) {
    case ErrorClass::kQuotaExceeded: return "QuotaExceeded";
    case ErrorClass::kTruncated: return "Truncated";
    case ErrorClass::kNetworkError: return "NetworkError";
    case ErrorClass::kAuthError: return "AuthError";
    case ErrorClass::kMalformedResponse: return "MalformedResponse";
    case ErrorClass::kTimeout: return "Timeout";
  }
  return "Unknown";
}

std::optional<ErrorClass> error_class_from_string(std::string_view s) noexcept {
  for (auto c : {ErrorClass::kQuotaExceeded, ErrorClass::kTruncated, ErrorClass::kNetworkError,
                 ErrorClass::kAuthError, ErrorClass::kMalformedResponse, ErrorClass::kTimeout}) {
    if (to_string(c) == s) return c;
  }
  return std::nullopt;
}

bool is_retryable(ErrorClass c) noexcept {
  switch (c) {
    case ErrorClass::kQuotaExceeded:
    case ErrorClass::kNetworkError:
    case ErrorClass::kTimeout:
    case ErrorClass::kTruncated:
      return true;
    case ErrorClass::kAuthError:
    case ErrorClass::kMalformedResponse:
      return false;
  }
  return false;
}

ProviderError make_error(ErrorClass c, std::string detail) {
  return {c, std::move(detail), is_retryable(c)};
}

void validate(const ModelSpec& spec) {
  if (spec.model_id.empty()) throw Error(ErrorCode::kConfigError, "model_id is empty");
  if (spec.kind != ProviderKind::kMock) {
    const auto scheme_end = spec.base_url.find("://");
    const bool scheme_ok = spec.base_url.starts_with("http://") ||
                           spec.base_url.starts_with("https://");
    if (!scheme_ok || scheme_end == std::string::npos ||
        spec.base_url.size() <= scheme_end + 3 || spec.base_url[scheme_end + 3] == '/') {
      throw Error(ErrorCode::kConfigError,
                  "base_url '" + spec.base_url + "' is not an http(s) URL with a host");
    }
  } else if (spec.base_url.empty()) {
    throw Error(ErrorCode::kConfigError, "mock provider needs a fixture path in base_url");
  }
  if (!(spec.temperature >= 0.0)) throw Error(ErrorCode::kConfigError, "temperature < 0");
  if (spec.max_output_tokens <= 0) throw Error(ErrorCode::kConfigError, "max_output_tokens <= 0");
  if (spec.timeout_ms <= 0) throw Error(ErrorCode::kConfigError, "timeout_ms <= 0");
  if (spec.max_concurrency <= 0) throw Error(ErrorCode::kConfigError, "max_concurrency <= 0");
}

void validate(const RetryPolicy& policy) {
  if (policy.max_attempts <= 0) throw Error(ErrorCode::kConfigError, "max_attempts <= 0");
  if (policy.base_delay_ms <= 0) throw Error(ErrorCode::kConfigError, "base_delay_ms <= 0");
  if (!(policy.backoff_factor > 1.0)) throw Error(ErrorCode::kConfigError, "backoff_factor <= 1");
  if (!(policy.jitter_fraction >= 0.0 && policy.jitter_fraction <= 1.0)) {
    throw Error(ErrorCode::kConfigError, "jitter_fraction outside [0,1]");
  }
}

std::chrono::milliseconds backoff_delay(const RetryPolicy& policy, int attempt, double unit) {
  const double nominal = static_cast<double>(policy.base_delay_ms) *
                         std::pow(policy.backoff_factor, static_cast<double>(attempt - 1));
  const double scaled = nominal * (1.0 + policy.jitter_fraction * std::clamp(unit, -1.0, 1.0));
  return std::chrono::milliseconds(static_cast<std::int64_t>(std::llround(scaled)));
}

std::optional<ErrorClass> classify_failure(const RawResponse& r) noexcept {
  const int s = r.http_status;
  if (s == 429) return ErrorClass::kQuotaExceeded;
  if (s == 401 || s == 403) return ErrorClass::kAuthError;
  if (s == 408) return ErrorClass::kTimeout;
  if (s >= 500) return ErrorClass::kNetworkError;
  if (s < 200 || s >= 300) return ErrorClass::kMalformedResponse;
  if (r.finish_reason == FinishReason::kLength) return ErrorClass::kTruncated;
  if (r.body_text.empty()) return ErrorClass::kMalformedResponse;
  return std::nullopt;
}

ErrorClass classify_failure(const TransportFailure& failure) noexcept {
  return failure.error_class == ErrorClass::kTimeout ? ErrorClass::kTimeout
                                                     : ErrorClass::kNetworkError;
}

ChatClient::ChatClient(ModelSpec spec, std::shared_ptr<Transport> transport,
                       ClientOptions options)
    : spec_(std::move(spec)),
      transport_(std::move(transport)),
      sleep_(std::move(options.sleep)),
      slots_(spec_.max_concurrency > 0 ? spec_.max_concurrency : 1),
      rng_(options.jitter_seed) {
  if (!sleep_) sleep_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

double ChatClient::next_jitter_unit() {
  std::lock_guard lock(rng_mu_);
  return std::uniform_real_distribution<double>(-1.0, 1.0)(rng_);
}

CompletionResult ChatClient::complete(const ChatRequest& request, const RetryPolicy& policy,
                                      const AttemptObserver& observer) {
  if (request.user.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "chat request has an empty user message");
  }
  CompletionResult result;
  for (int attempt = 1; attempt <= policy.max_attempts; ++attempt) {
    AttemptRecord rec;
    rec.attempt = attempt;
    result.attempts = attempt;

    TransportResult sent;
    std::optional<ProviderError> err;
    {
      slots_.acquire();
      struct Release {
        std::counting_semaphore<>& s;
        ~Release() { s.release(); }
      } release{slots_};
      try {
        sent = transport_->send(spec_, request);
      } catch (const Error& e) {
        err = make_error(ErrorClass::kMalformedResponse,
                         std::string(to_string(e.code())) + ": " + e.what());
        err->retryable = false;
      }
    }

    if (!err) {
      if (auto* failure = std::get_if<TransportFailure>(&sent)) {
        err = make_error(classify_failure(*failure), failure->detail);
      } else {
        auto& resp = std::get<RawResponse>(sent);
        if (auto cls = classify_failure(resp)) {
          std::string detail = "HTTP " + std::to_string(resp.http_status);
          if (*cls == ErrorClass::kTruncated) {
            detail = "output hit the token limit (finish_reason=length)";
          } else if (!resp.wire_body.empty()) {
            detail += ": " + resp.wire_body.substr(0, 300);
          }
          err = make_error(*cls, std::move(detail));
        }
        rec.response = std::move(resp);
      }
    }

    if (!err) {
      result.response = rec.response;
      if (observer) observer(rec);
      return result;
    }

    rec.error = err;
    const bool again = err->retryable && attempt < policy.max_attempts;
    if (again) rec.next_delay = backoff_delay(policy, attempt, next_jitter_unit());
    if (observer) observer(rec);
    if (!again) {
      result.error = std::move(err);
      return result;
    }
    sleep_(rec.next_delay);
  }
  return result;
}

std::shared_ptr<Transport> make_transport(const ModelSpec& spec) {
  if (spec.kind == ProviderKind::kMock) {
    return std::make_shared<MockTransport>(load_mock_script(spec.base_url));
  }
  return std::make_shared<HttpTransport>();
}

}  // namespace annoloop::providers

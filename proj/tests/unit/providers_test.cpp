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

#include <gtest/gtest.h>

#include <atomic>
#include <deque>
#include <thread>

#include "annoloop/error.hpp"
#include "annoloop/providers.hpp"
#include "test_support.hpp"

namespace annoloop::providers {
namespace {

using namespace std::chrono_literals;
using testing::SleepRecorder;

RawResponse status(int code) {
  RawResponse r;
  r.http_status = code;
  r.body_text = "x";
  return r;
}

TEST(ClassifyFailure, HttpStatusesAndFinishReasons) {
  EXPECT_EQ(classify_failure(status(429)), ErrorClass::kQuotaExceeded);
  EXPECT_EQ(classify_failure(status(401)), ErrorClass::kAuthError);
  EXPECT_EQ(classify_failure(status(403)), ErrorClass::kAuthError);
  EXPECT_EQ(classify_failure(status(408)), ErrorClass::kTimeout);
  EXPECT_EQ(classify_failure(status(500)), ErrorClass::kNetworkError);
  EXPECT_EQ(classify_failure(status(503)), ErrorClass::kNetworkError);
  EXPECT_EQ(classify_failure(status(400)), ErrorClass::kMalformedResponse);
  EXPECT_EQ(classify_failure(status(200)), std::nullopt);

  auto truncated = status(200);
  truncated.body_text = R"({"reasoning":"x","annotated)";
  truncated.finish_reason = FinishReason::kLength;
  EXPECT_EQ(classify_failure(truncated), ErrorClass::kTruncated);

  auto empty = status(200);
  empty.body_text.clear();
  EXPECT_EQ(classify_failure(empty), ErrorClass::kMalformedResponse);

  EXPECT_EQ(classify_failure(TransportFailure{ErrorClass::kNetworkError, "reset"}),
            ErrorClass::kNetworkError);
  EXPECT_EQ(classify_failure(TransportFailure{ErrorClass::kTimeout, "deadline"}),
            ErrorClass::kTimeout);
}

TEST(ErrorClassTest, Retryability) {
  EXPECT_TRUE(is_retryable(ErrorClass::kQuotaExceeded));
  EXPECT_TRUE(is_retryable(ErrorClass::kNetworkError));
  EXPECT_TRUE(is_retryable(ErrorClass::kTimeout));
  EXPECT_FALSE(is_retryable(ErrorClass::kAuthError));
  EXPECT_FALSE(is_retryable(ErrorClass::kMalformedResponse));
  for (auto c : {ErrorClass::kQuotaExceeded, ErrorClass::kTruncated, ErrorClass::kNetworkError,
                 ErrorClass::kAuthError, ErrorClass::kMalformedResponse, ErrorClass::kTimeout}) {
    EXPECT_EQ(error_class_from_string(to_string(c)), c);
    EXPECT_EQ(make_error(c, "d").retryable, is_retryable(c));
  }
}

TEST(Backoff, ExponentialWithJitterBounds) {
  RetryPolicy p;  // 500 ms, x2, 20% jitter
  EXPECT_EQ(backoff_delay(p, 1, 0.0), 500ms);
  EXPECT_EQ(backoff_delay(p, 2, 0.0), 1000ms);
  EXPECT_EQ(backoff_delay(p, 3, 0.0), 2000ms);
  EXPECT_EQ(backoff_delay(p, 1, 1.0), 600ms);
  EXPECT_EQ(backoff_delay(p, 1, -1.0), 400ms);
  p.jitter_fraction = 0.0;
  EXPECT_EQ(backoff_delay(p, 4, 0.7), 4000ms);
}

TEST(Validate, SpecAndPolicy) {
  ModelSpec s = testing::mock_spec();
  EXPECT_NO_THROW(validate(s));
  s.model_id.clear();
  EXPECT_THROW(validate(s), Error);
  s = testing::mock_spec();
  s.kind = ProviderKind::kOpenAICompatible;
  s.base_url = "not a url";
  EXPECT_THROW(validate(s), Error);
  s.base_url = "https://api.example.com/v1";
  EXPECT_NO_THROW(validate(s));
  s.temperature = -1;
  EXPECT_THROW(validate(s), Error);

  RetryPolicy p;
  EXPECT_NO_THROW(validate(p));
  p.max_attempts = 0;
  EXPECT_THROW(validate(p), Error);
  p = {};
  p.backoff_factor = 1.0;
  EXPECT_THROW(validate(p), Error);
  p = {};
  p.jitter_fraction = 1.5;
  EXPECT_THROW(validate(p), Error);
}

// Replays a fixed sequence of results, repeating the last.
class ScriptedTransport final : public Transport {
 public:
  explicit ScriptedTransport(std::vector<TransportResult> script) : script_(std::move(script)) {}
  TransportResult send(const ModelSpec&, const ChatRequest&) override {
    const auto i = std::min(calls++, script_.size() - 1);
    return script_[i];
  }
  std::size_t calls = 0;

 private:
  std::vector<TransportResult> script_;
};

RawResponse ok_body(std::string body) {
  RawResponse r;
  r.body_text = std::move(body);
  return r;
}

TEST(ChatClient, RetriesQuotaThenSucceeds) {
  auto t = std::make_shared<ScriptedTransport>(
      std::vector<TransportResult>{status(429), status(429), ok_body("{}")});
  SleepRecorder sleeps;
  ChatClient client(testing::mock_spec(), t, sleeps.options());
  RetryPolicy p;
  p.jitter_fraction = 0.0;
  std::vector<AttemptRecord> seen;
  const auto r = client.complete({"sys", "user", true}, p,
                                 [&](const AttemptRecord& a) { seen.push_back(a); });
  ASSERT_TRUE(r.ok());
  EXPECT_EQ(r.attempts, 3);
  EXPECT_EQ(t->calls, 3u);
  EXPECT_EQ(*sleeps.delays, (std::vector<std::chrono::milliseconds>{500ms, 1000ms}));
  ASSERT_EQ(seen.size(), 3u);
  EXPECT_EQ(seen[0].error->error_class, ErrorClass::kQuotaExceeded);
  EXPECT_EQ(seen[0].next_delay, 500ms);
  EXPECT_FALSE(seen[2].error.has_value());
}

TEST(ChatClient, ExhaustsAttemptsOnPersistentQuota) {
  auto t = std::make_shared<ScriptedTransport>(std::vector<TransportResult>{status(429)});
  SleepRecorder sleeps;
  ChatClient client(testing::mock_spec(), t, sleeps.options());
  const auto r = client.complete({"s", "u", true}, RetryPolicy{});
  ASSERT_FALSE(r.ok());
  EXPECT_EQ(r.error->error_class, ErrorClass::kQuotaExceeded);
  EXPECT_EQ(r.attempts, 4);
  EXPECT_EQ(t->calls, 4u);
  ASSERT_EQ(sleeps.delays->size(), 3u);
  const RetryPolicy p;
  for (std::size_t i = 0; i < 3; ++i) {
    const double nominal = 500.0 * std::pow(2.0, static_cast<double>(i));
    const auto d = static_cast<double>((*sleeps.delays)[i].count());
    EXPECT_GE(d, std::floor(nominal * (1 - p.jitter_fraction)));
    EXPECT_LE(d, std::ceil(nominal * (1 + p.jitter_fraction)));
  }
}

TEST(ChatClient, NonRetryableStopsAfterOneAttempt) {
  auto t = std::make_shared<ScriptedTransport>(std::vector<TransportResult>{status(401)});
  SleepRecorder sleeps;
  ChatClient client(testing::mock_spec(), t, sleeps.options());
  const auto r = client.complete({"s", "u", true}, RetryPolicy{});
  EXPECT_EQ(r.error->error_class, ErrorClass::kAuthError);
  EXPECT_EQ(r.attempts, 1);
  EXPECT_TRUE(sleeps.delays->empty());
}

TEST(ChatClient, TransportFailuresRetry) {
  auto t = std::make_shared<ScriptedTransport>(std::vector<TransportResult>{
      TransportFailure{ErrorClass::kNetworkError, "refused"},
      TransportFailure{ErrorClass::kTimeout, "slow"}, ok_body("{}")});
  SleepRecorder sleeps;
  ChatClient client(testing::mock_spec(), t, sleeps.options());
  const auto r = client.complete({"s", "u", true}, RetryPolicy{});
  EXPECT_TRUE(r.ok());
  EXPECT_EQ(r.attempts, 3);
}

TEST(ChatClient, TruncationIsRetriedThenReported) {
  RawResponse cut = ok_body(R"({"reasoning":"x)");
  cut.finish_reason = FinishReason::kLength;
  auto t = std::make_shared<ScriptedTransport>(std::vector<TransportResult>{cut});
  SleepRecorder sleeps;
  ChatClient client(testing::mock_spec(), t, sleeps.options());
  RetryPolicy p;
  p.max_attempts = 2;
  const auto r = client.complete({"s", "u", true}, p);
  EXPECT_EQ(r.error->error_class, ErrorClass::kTruncated);
  EXPECT_EQ(r.attempts, 2);
}

class ThrowingTransport final : public Transport {
 public:
  TransportResult send(const ModelSpec&, const ChatRequest&) override {
    throw Error(ErrorCode::kMissingFixture, "nothing scripted");
  }
};

TEST(ChatClient, TransportExceptionsBecomeMalformedResponse) {
  SleepRecorder sleeps;
  ChatClient client(testing::mock_spec(), std::make_shared<ThrowingTransport>(), sleeps.options());
  const auto r = client.complete({"s", "u", true}, RetryPolicy{});
  EXPECT_EQ(r.error->error_class, ErrorClass::kMalformedResponse);
  EXPECT_NE(r.error->detail.find("nothing scripted"), std::string::npos);
  EXPECT_EQ(r.attempts, 1);
}

class SlowTransport final : public Transport {
 public:
  TransportResult send(const ModelSpec&, const ChatRequest&) override {
    const int now = ++in_flight;
    int prev = peak.load();
    while (now > prev && !peak.compare_exchange_weak(prev, now)) {}
    std::this_thread::sleep_for(15ms);
    --in_flight;
    return ok_body("{}");
  }
  std::atomic<int> in_flight{0};
  std::atomic<int> peak{0};
};

TEST(ChatClient, ConcurrencyCapBoundsInFlightRequests) {
  auto t = std::make_shared<SlowTransport>();
  auto spec = testing::mock_spec();
  spec.max_concurrency = 2;
  ChatClient client(spec, t);
  std::vector<std::jthread> threads;
  for (int i = 0; i < 8; ++i) {
    threads.emplace_back([&] { client.complete({"s", "u", true}, RetryPolicy{}); });
  }
  threads.clear();
  EXPECT_LE(t->peak.load(), 2);
  EXPECT_GE(t->peak.load(), 1);
}

TEST(ChatClient, JitterIsSeededAndDeterministic) {
  const auto run = [](std::uint64_t seed) {
    auto t = std::make_shared<ScriptedTransport>(std::vector<TransportResult>{status(503)});
    SleepRecorder sleeps;
    ChatClient client(testing::mock_spec(), t, sleeps.options(seed));
    client.complete({"s", "u", true}, RetryPolicy{});
    return *sleeps.delays;
  };
  EXPECT_EQ(run(42), run(42));
}

TEST(MakeTransport, MockRequiresFixturePath) {
  auto spec = testing::mock_spec();
  spec.base_url = (testing::data_dir() / "reflective" / "annotator.json").string();
  EXPECT_NE(make_transport(spec), nullptr);
  spec.base_url = "/nonexistent/fixture.json";
  EXPECT_THROW(make_transport(spec), Error);
}

}  // namespace
}  // namespace annoloop::providers

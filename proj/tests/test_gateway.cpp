#include <doctest.h>

#include "esp/llm_gateway.hpp"

using namespace esp;

namespace {

LlmProfile fast_profile(int max_retries = 3) {
  LlmProfile p;
  p.name = "mock-model";
  p.endpoint = "mock://";
  p.max_retries = max_retries;
  p.backoff_base_ms = 1;
  p.backoff_ceiling_ms = 4;
  return p;
}

}  // namespace

TEST_CASE("fingerprint is the SHA-256 of role:content lines") {
  std::vector<ChatMessage> messages{{Role::User, "hello"}};
  // sha256("user:hello\n"), computed independently.
  CHECK(fingerprint(messages) ==
        "2fca529edfafa2a7a1c1a6ec108726669ae9bb70db9b81bc598fe33c67cc24cb");
}

TEST_CASE("mock transport replies from its script") {
  auto mock = std::make_shared<MockLlmTransport>();
  std::vector<ChatMessage> messages{{Role::User, "plan req A"}};
  mock->script(fingerprint(messages), "plan-JSON");

  LlmGateway gateway(mock, fast_profile());
  CHECK(gateway.complete(messages) == "plan-JSON");
  CHECK(mock->call_count() == 1);
}

TEST_CASE("complete rejects an empty message list") {
  auto mock = std::make_shared<MockLlmTransport>();
  LlmGateway gateway(mock, fast_profile());
  CHECK_THROWS_AS(gateway.complete({}), Error);
  CHECK(mock->call_count() == 0);
}

TEST_CASE("two transient failures then success lands on the third attempt") {
  auto mock = std::make_shared<MockLlmTransport>();
  std::vector<ChatMessage> messages{{Role::User, "flaky"}};
  mock->script(fingerprint(messages),
               std::vector<MockLlmTransport::Outcome>{
                   {MockLlmTransport::Outcome::Kind::TransientError, ""},
                   {MockLlmTransport::Outcome::Kind::TransientError, ""},
                   {MockLlmTransport::Outcome::Kind::Reply, "ok now"}});

  LlmGateway gateway(mock, fast_profile(3));
  CHECK(gateway.complete(messages) == "ok now");
  CHECK(mock->call_count() == 3);
}

TEST_CASE("retry budget exhaustion surfaces Unavailable") {
  auto mock = std::make_shared<MockLlmTransport>();
  std::vector<ChatMessage> messages{{Role::User, "always down"}};
  mock->script(fingerprint(messages),
               std::vector<MockLlmTransport::Outcome>{
                   {MockLlmTransport::Outcome::Kind::TransientError, ""}});

  LlmGateway gateway(mock, fast_profile(2));
  try {
    gateway.complete(messages);
    FAIL("expected Unavailable");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Unavailable);
  }
  CHECK(mock->call_count() == 3);  // 1 attempt + 2 retries
}

TEST_CASE("timeouts are terminal, never retried") {
  auto mock = std::make_shared<MockLlmTransport>();
  std::vector<ChatMessage> messages{{Role::User, "slow"}};
  mock->script(fingerprint(messages),
               std::vector<MockLlmTransport::Outcome>{
                   {MockLlmTransport::Outcome::Kind::TimeoutError, ""},
                   {MockLlmTransport::Outcome::Kind::Reply, "never reached"}});

  LlmGateway gateway(mock, fast_profile(3));
  try {
    gateway.complete(messages);
    FAIL("expected Timeout");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Timeout);
  }
  CHECK(mock->call_count() == 1);
}

TEST_CASE("unknown fingerprint behavior is configurable") {
  std::vector<ChatMessage> messages{{Role::System, "be terse"}, {Role::User, "what is this?"}};

  SUBCASE("error mode raises ScriptMiss") {
    auto mock = std::make_shared<MockLlmTransport>(ScriptMissBehavior::Error);
    LlmGateway gateway(mock, fast_profile());
    try {
      gateway.complete(messages);
      FAIL("expected ScriptMiss");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::ScriptMiss);
    }
  }

  SUBCASE("echo mode returns the last user message") {
    auto mock = std::make_shared<MockLlmTransport>(ScriptMissBehavior::EchoLastUser);
    LlmGateway gateway(mock, fast_profile());
    CHECK(gateway.complete(messages) == "what is this?");
  }
}

TEST_CASE("mock scripts load from JSON") {
  std::vector<ChatMessage> messages{{Role::User, "hi"}};
  const std::string fp = fingerprint(messages);
  Json script{{"unknown_fingerprint", "echo"},
              {"entries", {{fp, Json::array({Json{{"error", "transient"}}, "recovered"})}}}};
  auto mock = MockLlmTransport::from_json(script);

  LlmGateway gateway(mock, fast_profile());
  CHECK(gateway.complete(messages) == "recovered");
  CHECK(mock->call_count() == 2);
  CHECK(gateway.complete({{Role::User, "unscripted"}}) == "unscripted");
}

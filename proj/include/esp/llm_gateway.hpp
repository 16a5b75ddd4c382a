#pragma once

#include <chrono>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "esp/core.hpp"

namespace esp {

enum class Role { System, User, Assistant };

const char* to_string(Role role);

struct ChatMessage {
  Role role = Role::User;
  std::string content;

  bool operator==(const ChatMessage&) const = default;
};

/// One reachable chat-completion backend. `name` doubles as the model id
/// sent on the wire; temperature defaults to 0 so mock-backed runs stay
/// byte-deterministic.
struct LlmProfile {
  std::string name;
  std::string endpoint;
  double temperature = 0.0;
  int max_tokens = 512;
  int timeout_ms = 30000;
  int max_retries = 3;
  int backoff_base_ms = 100;
  int backoff_ceiling_ms = 2000;
  double rate_limit_rps = 0.0;  // 0 = unlimited
  std::string api_key_env;      // env var holding the bearer token
};

/// Stable request fingerprint: SHA-256 over concatenated "role:content\n"
/// lines, lowercase hex.
std::string fingerprint(const std::vector<ChatMessage>& messages);

/// A single completion attempt against one backend. Retry policy lives in
/// LlmGateway, not here.
class LlmTransport {
 public:
  virtual ~LlmTransport() = default;

  /// Returns the assistant text. Throws Error with Timeout, Unavailable, or
  /// ProtocolError; Unavailable marks a transient failure worth retrying.
  virtual std::string attempt(const LlmProfile& profile,
                              const std::vector<ChatMessage>& messages) = 0;
};

/// OpenAI-style chat JSON over HTTP:
///   POST endpoint {model, messages, temperature, max_tokens} -> choices[0].
class HttpLlmTransport final : public LlmTransport {
 public:
  std::string attempt(const LlmProfile& profile,
                      const std::vector<ChatMessage>& messages) override;
};

enum class ScriptMissBehavior { Error, EchoLastUser };

/// Deterministic scripted backend keyed by request fingerprint. Each entry
/// is a queue of outcomes consumed per attempt (the last one repeats), so
/// transient failures can be injected ahead of a reply.
class MockLlmTransport final : public LlmTransport {
 public:
  struct Outcome {
    enum class Kind { Reply, TransientError, TimeoutError } kind = Kind::Reply;
    std::string text;
  };

  explicit MockLlmTransport(ScriptMissBehavior miss_behavior = ScriptMissBehavior::Error)
      : miss_behavior_(miss_behavior) {}

  void script(const std::string& fp, std::string reply);
  void script(const std::string& fp, std::vector<Outcome> outcomes);

  /// Script file: {"unknown_fingerprint": "error"|"echo",
  ///               "entries": {fp: reply | [reply | {"error": "transient"|"timeout"}]}}
  static std::shared_ptr<MockLlmTransport> from_file(const std::string& path);
  static std::shared_ptr<MockLlmTransport> from_json(const Json& j);

  std::string attempt(const LlmProfile& profile,
                      const std::vector<ChatMessage>& messages) override;

  int call_count() const;
  std::vector<std::string> call_log() const;  // fingerprints, in attempt order

 private:
  mutable std::mutex mu_;
  ScriptMissBehavior miss_behavior_;
  std::map<std::string, std::deque<Outcome>> entries_;
  std::vector<std::string> calls_;
};

/// Per-profile token bucket; acquire() blocks until a request slot frees up.
class TokenBucket {
 public:
  explicit TokenBucket(double rate_per_second);
  void acquire();

 private:
  std::mutex mu_;
  double rate_;
  double tokens_;
  std::chrono::steady_clock::time_point last_refill_;
};

/// Uniform completion interface: rate limiting, retry with exponential
/// backoff on transient transport failures, no retry on 4xx-class or
/// timeout failures.
class LlmGateway {
 public:
  LlmGateway(std::shared_ptr<LlmTransport> transport, LlmProfile profile);

  /// Precondition: messages nonempty.
  std::string complete(const std::vector<ChatMessage>& messages);

  const LlmProfile& profile() const { return profile_; }

 private:
  std::shared_ptr<LlmTransport> transport_;
  LlmProfile profile_;
  std::shared_ptr<TokenBucket> bucket_;  // null when unlimited
};

}  // namespace esp

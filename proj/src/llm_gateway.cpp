#include "esp/llm_gateway.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <thread>

#include "esp/hash.hpp"
#include "http_support.hpp"

namespace esp {

const char* to_string(Role role) {
  switch (role) {
    case Role::System: return "system";
    case Role::User: return "user";
    case Role::Assistant: return "assistant";
  }
  return "user";
}

std::string fingerprint(const std::vector<ChatMessage>& messages) {
  std::string buffer;
  for (const ChatMessage& m : messages) {
    buffer += to_string(m.role);
    buffer += ':';
    buffer += m.content;
    buffer += '\n';
  }
  return sha256_hex(buffer);
}

// ---------------------------------------------------------------------------
// HTTP transport
// ---------------------------------------------------------------------------

std::string HttpLlmTransport::attempt(const LlmProfile& profile,
                                      const std::vector<ChatMessage>& messages) {
  Json body{{"model", profile.name},
            {"temperature", profile.temperature},
            {"max_tokens", profile.max_tokens}};
  Json msgs = Json::array();
  for (const ChatMessage& m : messages) {
    msgs.push_back({{"role", to_string(m.role)}, {"content", m.content}});
  }
  body["messages"] = std::move(msgs);

  auto [base, path] = detail::split_url(profile.endpoint);
  auto client = detail::make_client(base, profile.timeout_ms);

  httplib::Headers headers;
  if (!profile.api_key_env.empty()) {
    if (const char* key = std::getenv(profile.api_key_env.c_str())) {
      headers.emplace("Authorization", std::string("Bearer ") + key);
    }
  }

  auto started = std::chrono::steady_clock::now();
  auto result = client.Post(path, headers, body.dump(), "application/json");
  if (!result) {
    auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
                       std::chrono::steady_clock::now() - started)
                       .count();
    const bool timed_out = result.error() == httplib::Error::ConnectionTimeout ||
                           (result.error() == httplib::Error::Read && elapsed >= profile.timeout_ms);
    if (timed_out) {
      throw Error(ErrorCode::Timeout,
                  fmt::format("no reply from {} within {} ms", profile.endpoint, profile.timeout_ms));
    }
    throw Error(ErrorCode::Unavailable,
                fmt::format("transport failure against {}: {}", profile.endpoint,
                            httplib::to_string(result.error())));
  }
  if (result->status >= 500) {
    throw Error(ErrorCode::Unavailable,
                fmt::format("server error {} from {}", result->status, profile.endpoint));
  }
  if (result->status >= 400) {
    throw Error(ErrorCode::ProtocolError,
                fmt::format("status {} from {}: {}", result->status, profile.endpoint,
                            result->body.substr(0, 200)));
  }

  try {
    Json reply = Json::parse(result->body);
    return reply.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::ProtocolError,
                fmt::format("malformed provider payload: {}", e.what()));
  }
}

// ---------------------------------------------------------------------------
// Mock transport
// ---------------------------------------------------------------------------

void MockLlmTransport::script(const std::string& fp, std::string reply) {
  script(fp, std::vector<Outcome>{{Outcome::Kind::Reply, std::move(reply)}});
}

void MockLlmTransport::script(const std::string& fp, std::vector<Outcome> outcomes) {
  std::lock_guard lock(mu_);
  entries_[fp] = std::deque<Outcome>(outcomes.begin(), outcomes.end());
}

std::shared_ptr<MockLlmTransport> MockLlmTransport::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open mock script " + path);
  Json j;
  try {
    in >> j;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::ParseFailure, fmt::format("mock script {}: {}", path, e.what()));
  }
  return from_json(j);
}

std::shared_ptr<MockLlmTransport> MockLlmTransport::from_json(const Json& j) {
  const std::string miss = j.value("unknown_fingerprint", "error");
  auto behavior = miss == "echo" ? ScriptMissBehavior::EchoLastUser : ScriptMissBehavior::Error;
  auto mock = std::make_shared<MockLlmTransport>(behavior);
  if (j.contains("entries")) {
    for (const auto& [fp, value] : j.at("entries").items()) {
      std::vector<Outcome> outcomes;
      auto parse_one = [](const Json& item) -> Outcome {
        if (item.is_string()) return {Outcome::Kind::Reply, item.get<std::string>()};
        const std::string kind = item.value("error", "transient");
        if (kind == "timeout") return {Outcome::Kind::TimeoutError, ""};
        return {Outcome::Kind::TransientError, ""};
      };
      if (value.is_array()) {
        for (const auto& item : value) outcomes.push_back(parse_one(item));
      } else {
        outcomes.push_back(parse_one(value));
      }
      mock->script(fp, std::move(outcomes));
    }
  }
  return mock;
}

std::string MockLlmTransport::attempt(const LlmProfile&,
                                      const std::vector<ChatMessage>& messages) {
  const std::string fp = fingerprint(messages);
  Outcome outcome;
  {
    std::lock_guard lock(mu_);
    calls_.push_back(fp);
    auto it = entries_.find(fp);
    if (it == entries_.end()) {
      if (miss_behavior_ == ScriptMissBehavior::Error) {
        throw Error(ErrorCode::ScriptMiss, "no scripted reply for fingerprint " + fp);
      }
      for (auto rit = messages.rbegin(); rit != messages.rend(); ++rit) {
        if (rit->role == Role::User) return rit->content;
      }
      return "";
    }
    outcome = it->second.front();
    if (it->second.size() > 1) it->second.pop_front();
  }
  switch (outcome.kind) {
    case Outcome::Kind::Reply: return outcome.text;
    case Outcome::Kind::TransientError:
      throw Error(ErrorCode::Unavailable, "scripted transient failure");
    case Outcome::Kind::TimeoutError:
      throw Error(ErrorCode::Timeout, "scripted timeout");
  }
  return outcome.text;
}

int MockLlmTransport::call_count() const {
  std::lock_guard lock(mu_);
  return static_cast<int>(calls_.size());
}

std::vector<std::string> MockLlmTransport::call_log() const {
  std::lock_guard lock(mu_);
  return calls_;
}

// ---------------------------------------------------------------------------
// Rate limiting and the gateway
// ---------------------------------------------------------------------------

TokenBucket::TokenBucket(double rate_per_second)
    : rate_(rate_per_second),
      tokens_(std::max(1.0, rate_per_second)),
      last_refill_(std::chrono::steady_clock::now()) {}

void TokenBucket::acquire() {
  while (true) {
    std::chrono::duration<double> wait{0};
    {
      std::lock_guard lock(mu_);
      auto now = std::chrono::steady_clock::now();
      std::chrono::duration<double> elapsed = now - last_refill_;
      last_refill_ = now;
      tokens_ = std::min(std::max(1.0, rate_), tokens_ + elapsed.count() * rate_);
      if (tokens_ >= 1.0) {
        tokens_ -= 1.0;
        return;
      }
      wait = std::chrono::duration<double>((1.0 - tokens_) / rate_);
    }
    std::this_thread::sleep_for(wait);
  }
}

LlmGateway::LlmGateway(std::shared_ptr<LlmTransport> transport, LlmProfile profile)
    : transport_(std::move(transport)), profile_(std::move(profile)) {
  if (profile_.rate_limit_rps > 0) {
    bucket_ = std::make_shared<TokenBucket>(profile_.rate_limit_rps);
  }
}

std::string LlmGateway::complete(const std::vector<ChatMessage>& messages) {
  if (messages.empty()) {
    throw Error(ErrorCode::Precondition, "complete called with no messages");
  }
  int failures = 0;
  while (true) {
    if (bucket_) bucket_->acquire();
    try {
      return transport_->attempt(profile_, messages);
    } catch (const Error& e) {
      // Timeouts and 4xx-class protocol errors are terminal; only transient
      // transport failures are retried.
      if (e.code() != ErrorCode::Unavailable || failures >= profile_.max_retries) {
        throw;
      }
      const int shift = std::min(failures, 20);
      const int delay =
          std::min<long long>(profile_.backoff_ceiling_ms,
                              static_cast<long long>(profile_.backoff_base_ms) << shift);
      ++failures;
      std::this_thread::sleep_for(std::chrono::milliseconds(delay));
    }
  }
}

}  // namespace esp

#pragma once

#include <stdexcept>
#include <string>

namespace esp {

enum class ErrorCode {
  Timeout,
  Unavailable,
  ProtocolError,
  ScriptMiss,
  ParseFailure,
  NoJsonFound,
  SchemaViolation,
  VocabularyViolation,
  NoModelsAvailable,
  UnresolvedDependency,
  SubtaskFailed,
  DegenerateEmbedding,
  IoError,
  ConfigError,
  Precondition,
};

const char* to_string(ErrorCode code);

/// Exception carrying the taxonomy code alongside the message.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace esp

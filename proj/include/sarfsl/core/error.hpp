#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sarfsl {

// Failure families. The CLI maps each onto an exit code and a stable
// machine-parsable category string.
enum class ErrorKind {
  kParameter,  // out-of-range argument to a numeric routine
  kShape,      // tensor / chip dimension mismatch
  kSchema,     // malformed manifest, config or checkpoint contents
  kLoad,       // missing or unreadable file
  kEmptyPool,
  kSampling,   // not enough classes or chips for an episode
  kConfig,     // invalid configuration values
  kConfigNotFound,
  kProtocol,   // experiment protocol violation (e.g. OE/OOD overlap)
  kMetric,     // metric preconditions (empty score lists)
  kEmptyScores,
  kRuntime,
};

std::string_view error_category(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }
  std::string_view category() const { return error_category(kind_); }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

inline void require(bool condition, ErrorKind kind, const std::string& message) {
  if (!condition) fail(kind, message);
}

}  // namespace sarfsl

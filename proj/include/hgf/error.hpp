#pragma once

#include <stdexcept>
#include <string>

namespace hgf {

enum class ErrorKind {
  kValidation,    // malformed input, out-of-range values
  kConflict,      // duplicates, already-exists
  kState,         // operation not allowed in current state
  kPrecondition,  // mathematical / domain preconditions
  kNotFound,
  kLocked,
  kUnauthorized,
  kIo,
  kExhausted,     // nothing left to serve
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kValidation: return "validation";
    case ErrorKind::kConflict: return "conflict";
    case ErrorKind::kState: return "state";
    case ErrorKind::kPrecondition: return "precondition";
    case ErrorKind::kNotFound: return "not_found";
    case ErrorKind::kLocked: return "locked";
    case ErrorKind::kUnauthorized: return "unauthorized";
    case ErrorKind::kIo: return "io";
    case ErrorKind::kExhausted: return "exhausted";
  }
  return "unknown";
}

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace hgf

#pragma once

#include <stdexcept>
#include <string>

namespace slr {

/// Error categories. The numeric values double as CLI exit codes.
enum class ErrorKind : int {
  usage = 1,
  validation = 2,
  runtime = 3,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void throw_validation(const std::string& message) {
  throw Error(ErrorKind::validation, message);
}

[[noreturn]] inline void throw_runtime(const std::string& message) {
  throw Error(ErrorKind::runtime, message);
}

[[noreturn]] inline void throw_usage(const std::string& message) {
  throw Error(ErrorKind::usage, message);
}

}  // namespace slr

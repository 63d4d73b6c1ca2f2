#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ihtp {

/// Failure categories. The command line tool maps each one to its own exit code.
enum class ErrorKind {
  InvalidArgument,
  Domain,
  Numerical,
  Io,
  ManifestMismatch,
  TrainingFailure,
  Internal,
};

std::string_view to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& what);

inline void require(bool condition, ErrorKind kind, const std::string& what) {
  if (!condition) fail(kind, what);
}

}  // namespace ihtp

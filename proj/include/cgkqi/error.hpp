#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cgkqi {

enum class ErrorKind {
  Shape,          // mismatched frame or matrix dimensions
  Ordering,       // timestamps not strictly increasing
  EmptySession,   // no frames
  Undersampling,  // capture rate below session rate
  Degenerate,     // zero-length session, constant baseline
  NoResponse,     // no action produced a visible response
  Config,         // invalid generator / model configuration
  Validation,     // malformed or out-of-range input data
  Usage,          // API misuse (transform before fit, bad arguments)
  Io,             // file could not be read or written
};

std::string_view to_string(ErrorKind kind);

/// Base exception for every error raised by the library. The kind decides
/// how the command-line front end maps it onto an exit code.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

}  // namespace cgkqi

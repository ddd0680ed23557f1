#pragma once

#include <stdexcept>
#include <string>

namespace mdwi {

/// Error categories surfaced by the library. The CLI prints the tag as the
/// machine-parseable prefix of its single-line error message.
enum class ErrorKind {
  invalid_argument,
  not_on_manifold,
  degenerate,
  unsupported_format,
  io,
  shape_mismatch,
  divergence,
};

inline const char* to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::invalid_argument: return "invalid_argument";
    case ErrorKind::not_on_manifold: return "not_on_manifold";
    case ErrorKind::degenerate: return "degenerate";
    case ErrorKind::unsupported_format: return "unsupported_format";
    case ErrorKind::io: return "io";
    case ErrorKind::shape_mismatch: return "shape_mismatch";
    case ErrorKind::divergence: return "divergence";
  }
  return "unknown";
}

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

}  // namespace mdwi

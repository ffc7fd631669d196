#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hsiseg {

enum class Errc {
  invalid_argument,
  dimension_mismatch,
  out_of_range,
  format,
  io,
  not_found,
  conflict,
  numeric,
};

inline std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::invalid_argument: return "invalid_argument";
    case Errc::dimension_mismatch: return "dimension_mismatch";
    case Errc::out_of_range: return "out_of_range";
    case Errc::format: return "format";
    case Errc::io: return "io";
    case Errc::not_found: return "not_found";
    case Errc::conflict: return "conflict";
    case Errc::numeric: return "numeric";
  }
  return "unknown";
}

/// Every failure raised by the library carries one of these codes so callers
/// (CLI exit status, HTTP status) can classify it without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace hsiseg

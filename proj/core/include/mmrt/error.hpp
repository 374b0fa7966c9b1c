#pragma once

#include <cstdint>
#include <ostream>
#include <stdexcept>
#include <string>

namespace mmrt {

/// 1-based position inside a source text. A default-constructed span means
/// "no source location" (programmatically built elements).
struct SourceSpan {
  std::string file;
  std::uint32_t line = 0;
  std::uint32_t column = 0;

  bool known() const { return line != 0; }
};

std::ostream& operator<<(std::ostream& os, const SourceSpan& span);

/// Error thrown by every fallible operation in the library. `code` is one of
/// the stable ERR_* identifiers (ERR_SYNTAX, ERR_REENTRANT, ...).
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message, SourceSpan span = {})
      : std::runtime_error(message), code_(std::move(code)), span_(std::move(span)) {}

  const std::string& code() const { return code_; }
  const SourceSpan& span() const { return span_; }

 private:
  std::string code_;
  SourceSpan span_;
};

}  // namespace mmrt

#pragma once

#include <stdexcept>
#include <string>

namespace binsparse {

/// Every failure raised by the library. The kind lets callers (the CLI in
/// particular) map failures onto exit codes without string matching.
class Error : public std::runtime_error {
 public:
  enum class Kind {
    dtype,       // malformed or illegal type string
    descriptor,  // JSON header problems
    levels,      // unsupported or malformed level tree
    tensor,      // structural problems with tensor data
    format,      // NPY / zip framing problems
    io,          // filesystem failures
    text,        // Matrix Market / FROSTT parse errors
    usage,       // bad arguments
  };

  Error(Kind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

}  // namespace binsparse

#pragma once

#include <stdexcept>
#include <string>

namespace pa {

enum class ErrorKind {
  Shape,     // operand dimensions do not line up
  Domain,    // argument outside the documented range
  Format,    // malformed file or stream
  Io,        // file system failure
  Numeric,   // NaN/Inf where a finite value is required
  Config,    // invalid configuration
};

/// Every error raised by the library. The message names the offending
/// dimension, file, or value.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace pa

#pragma once

#include <stdexcept>
#include <string>

namespace oep {

// Machine-readable error categories. The numeric values are part of the C API
// (see oep.h) and must not be reordered.
enum class ErrorCategory : int {
  Parameter = 1,
  Data = 2,
  Range = 3,
  Training = 4,
  Config = 5,
  Io = 6,
  Version = 7,
  Integrity = 8,
};

const char* category_name(ErrorCategory c) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

[[noreturn]] inline void fail(ErrorCategory c, const std::string& msg) { throw Error(c, msg); }

}  // namespace oep

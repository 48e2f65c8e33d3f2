#pragma once

#include <stdexcept>
#include <string>

namespace smc {

enum class ErrorCode {
  invalid_argument = 1,
  shape_mismatch = 2,
  non_finite = 3,
  io = 4,
  format = 5,
  state = 6,
  exists = 7,
};

// Every failure raised by the library carries one of the codes above so the
// C API can map it onto a status value without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

}  // namespace smc

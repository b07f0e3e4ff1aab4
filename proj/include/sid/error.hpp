#pragma once

#include <stdexcept>
#include <string>

namespace sid {

enum class ErrorCode {
  InvalidArgument,  // violated precondition or type invariant
  Io,               // missing or unreadable file
  Format,           // malformed file contents or metadata
  Mismatch,         // spec/weights/arrangement disagreement
  Numeric,          // non-finite value produced
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline void require(bool cond, const std::string& what,
                    ErrorCode code = ErrorCode::InvalidArgument) {
  if (!cond) throw Error(code, what);
}

}  // namespace sid

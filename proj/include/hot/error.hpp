#pragma once

#include <stdexcept>
#include <string>

namespace hot {

/// Failure categories surfaced to callers and mapped to CLI exit codes.
enum class ErrorKind {
  invalid_input,   // bad files, shapes, preconditions
  solver_failure,  // OT / alignment did not produce a usable answer
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail_input(const std::string& what) {
  throw Error(ErrorKind::invalid_input, what);
}

[[noreturn]] inline void fail_solver(const std::string& what) {
  throw Error(ErrorKind::solver_failure, what);
}

}  // namespace hot

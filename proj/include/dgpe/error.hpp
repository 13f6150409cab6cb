#pragma once

#include <stdexcept>
#include <string>

namespace dgpe {

/// Error categories; each maps onto one CLI exit code.
enum class ErrorKind {
  invalid_argument,  // malformed input or violated precondition
  domain,            // input outside the set where the quantity is defined
  non_convergence,   // iterative solver did not converge
  missing_input,     // required file absent or unreadable
  numerical_abort,   // NaN/Inf or unresolved computation
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::non_convergence:
      return 2;
    case ErrorKind::domain:
      return 3;
    case ErrorKind::missing_input:
      return 4;
    case ErrorKind::numerical_abort:
      return 5;
    case ErrorKind::invalid_argument:
      break;
  }
  return 1;
}

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

inline void require(bool cond, const std::string& what) {
  if (!cond) fail(ErrorKind::invalid_argument, what);
}

}  // namespace dgpe

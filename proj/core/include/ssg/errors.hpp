#pragma once

#include <stdexcept>
#include <string>

namespace ssg {

enum class ErrorKind {
  EvalOnLightcone,
  OutOfDomain,
  SingularCoincidence,
  CancellationFailure,
  NegativeGrade,
  SingularityBudgetExceeded,
  InvalidExponent,
  GridTooCoarse,
  DegenerateConfiguration,
  CflViolation,
  Config,
};

const char* error_kind_name(ErrorKind k);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(error_kind_name(kind)) + ": " + what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace ssg

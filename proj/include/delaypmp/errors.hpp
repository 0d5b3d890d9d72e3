#pragma once

#include <stdexcept>
#include <string>

namespace delaypmp {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition on an argument was violated (bad dimensions, non-positive step, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A function was evaluated outside the interval it is defined on.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values, non-convergence or a failed search.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// The operation needs data the problem does not provide (e.g. derivatives).
class Unsupported : public Error {
 public:
  using Error::Error;
};

/// Malformed problem-spec document; `field()` names the offending entry.
class SpecError : public Error {
 public:
  SpecError(std::string field, const std::string& what)
      : Error("spec field '" + field + "': " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace delaypmp

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace probediag {

// Base class for every error raised by the library. `kind()` is a stable
// machine-readable tag used by the CLI error JSON.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
  virtual const char* kind() const noexcept { return "error"; }
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "invalid_argument"; }
};

// Out-of-range state in an assignment; `position()` is the offending slot.
class StateOutOfRange : public InvalidArgument {
 public:
  StateOutOfRange(const std::string& what, std::size_t position)
      : InvalidArgument(what), position_(position) {}
  std::size_t position() const noexcept { return position_; }
  const char* kind() const noexcept override { return "state_out_of_range"; }

 private:
  std::size_t position_;
};

// The model assigns zero probability to the observed data.
class ContradictionError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "contradiction"; }
};

// Exhaustive computation refused because it exceeds the configured budget.
class SizeGuardError : public Error {
 public:
  SizeGuardError(const std::string& what, double required, double budget)
      : Error(what), required_(required), budget_(budget) {}
  double required() const noexcept { return required_; }
  double budget() const noexcept { return budget_; }
  const char* kind() const noexcept override { return "size_guard"; }

 private:
  double required_;
  double budget_;
};

class IoError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "io"; }
};

}  // namespace probediag

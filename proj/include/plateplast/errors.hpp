#pragma once

#include <stdexcept>
#include <string>

namespace plateplast {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad constructor arguments (material constants, grid sizes, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A condition that valid inputs cannot produce.
class InternalError : public Error {
 public:
  using Error::Error;
};

/// Iterative local solver hit its iteration cap above tolerance.
class NonConvergence : public Error {
 public:
  using Error::Error;
};

/// Line search of the elastic Newton solver could not decrease the energy.
class NewtonStall : public Error {
 public:
  using Error::Error;
};

class GridMismatch : public Error {
 public:
  using Error::Error;
};

class LogOutOfDomain : public Error {
 public:
  using Error::Error;
};

/// Malformed configuration text, located by line.
class ParseError : public Error {
 public:
  ParseError(int line, const std::string& key, const std::string& reason)
      : Error("line " + std::to_string(line) + (key.empty() ? "" : ", key '" + key + "'") +
              ": " + reason),
        line_(line), key_(key) {}
  int line() const { return line_; }
  const std::string& key() const { return key_; }

 private:
  int line_;
  std::string key_;
};

/// A configuration value outside its admissible range; key is section.name.
class ValidationError : public Error {
 public:
  ValidationError(const std::string& key, const std::string& reason)
      : Error(key + ": " + reason), key_(key) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

/// Failure inside one incremental step; carries the step index.
class StepError : public Error {
 public:
  StepError(std::size_t step, const std::string& what)
      : Error("step " + std::to_string(step) + ": " + what), step_(step) {}
  std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

}  // namespace plateplast

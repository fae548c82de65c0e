#pragma once

#include <stdexcept>
#include <string>

namespace quantband {

// Two failure families, mapped by the CLI onto exit codes 2 and 3.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InputError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

class ParseError : public InputError {
 public:
  ParseError(std::size_t line, std::size_t column, const std::string& what)
      : InputError("parse error at line " + std::to_string(line) + ", column " +
                   std::to_string(column) + ": " + what),
        line_(line),
        column_(column) {}
  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

class SchemaError : public InputError {
 public:
  using InputError::InputError;
};

class EmptyData : public InputError {
 public:
  using InputError::InputError;
};

class ConfigError : public InputError {
 public:
  ConfigError(const std::string& field, const std::string& what)
      : InputError("config error at '" + field + "': " + what), field_(field) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

class NonFiniteResult : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class ImaginaryResidual : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class DegenerateWeights : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class EmptyGrid : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class NoFiniteCandidate : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class NegativeSignalVariance : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace quantband

#pragma once

#include <stdexcept>
#include <string>

namespace cliplab {

// Base of every error thrown by the library. The CLI maps the subclasses onto
// its exit codes: usage/input problems exit 2, runtime aborts exit 3.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Violated precondition of an operation (bad arguments, empty inputs).
class ContractError : public Error {
 public:
  using Error::Error;
};

// Operand shapes do not line up.
class DimensionError : public ContractError {
 public:
  using ContractError::ContractError;
};

// Input data is unusable: non-finite entries, zero rows under cosine, ...
class InputError : public Error {
 public:
  using Error::Error;
};

// File parse failure located at (file, line, column).
class ParseError : public InputError {
 public:
  ParseError(const std::string& file, std::size_t line, std::size_t column, const std::string& what)
      : InputError(file + ":" + std::to_string(line) + ":" + std::to_string(column) + ": " + what),
        file_(file), line_(line), column_(column) {}

  const std::string& file() const noexcept { return file_; }
  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::string file_;
  std::size_t line_;
  std::size_t column_;
};

// Encoder collapsed to (near) zero output so norms cannot be normalized.
class DegenerateEncoderError : public Error {
 public:
  using Error::Error;
};

// Non-finite loss or gradient during optimization.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace cliplab

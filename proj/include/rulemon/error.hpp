#pragma once

#include <stdexcept>
#include <string>

namespace rulemon {

// Exception hierarchy. The CLI maps each category onto its exit code:
// UsageError -> 1, DataError (and subclasses) -> 2, NumericError -> 3.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UsageError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

/// Lexical or syntax error in rule text, carrying a 1-based position.
class ParseError : public DataError {
 public:
  ParseError(const std::string& message, int line, int column)
      : DataError(std::to_string(line) + ":" + std::to_string(column) + ": " + message),
        line_(line),
        column_(column) {}

  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_;
  int column_;
};

class BindError : public DataError {
 public:
  using DataError::DataError;
};

}  // namespace rulemon

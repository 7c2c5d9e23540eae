#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dvscar {

// Parameter or argument outside the admissible domain of a copula family.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// An iterative numerical routine failed to reach its tolerance.
class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input file. Carries 1-based line (and column when known).
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line, std::size_t column = 0)
      : std::runtime_error(format(what, line, column)), line_(line), column_(column) {}

  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  static std::string format(const std::string& what, std::size_t line, std::size_t column) {
    std::string s = "line " + std::to_string(line);
    if (column > 0) s += ", column " + std::to_string(column);
    return s + ": " + what;
  }

  std::size_t line_;
  std::size_t column_;
};

}  // namespace dvscar

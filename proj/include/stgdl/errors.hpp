#pragma once

#include <stdexcept>
#include <string>

namespace stgdl {

// Operand extents do not agree.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// An argument lies outside the domain of the operation.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// A file could not be read or did not have the expected layout.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& file, std::size_t line, const std::string& what)
      : std::runtime_error(file + (line ? ":" + std::to_string(line) : std::string{}) +
                           ": " + what),
        file_(file),
        line_(line) {}

  const std::string& file() const noexcept { return file_; }
  std::size_t line() const noexcept { return line_; }

 private:
  std::string file_;
  std::size_t line_;
};

// Training produced a non-finite value.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(int epoch, const std::string& term, const std::string& what)
      : std::runtime_error(what), epoch_(epoch), term_(term) {}

  int epoch() const noexcept { return epoch_; }
  const std::string& term() const noexcept { return term_; }

 private:
  int epoch_;
  std::string term_;
};

}  // namespace stgdl

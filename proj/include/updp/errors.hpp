#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace updp {

/// Base of every recoverable error raised by the library. Precondition
/// violations by the caller use std::invalid_argument instead.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input text. `line()` is 1-based; 0 when the source has no lines.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// A vector that must be normalized has zero norm.
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

/// Every token at a prompt position was excluded.
class VocabularyExhaustedError : public Error {
 public:
  explicit VocabularyExhaustedError(std::size_t position)
      : Error("vocabulary exhausted by blacklist at position " + std::to_string(position)),
        position_(position) {}
  std::size_t position() const noexcept { return position_; }

 private:
  std::size_t position_;
};

class NonFiniteError : public Error {
 public:
  NonFiniteError(std::size_t step, const std::string& what)
      : Error("non-finite " + what + " at step " + std::to_string(step)), step_(step) {}
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

}  // namespace updp

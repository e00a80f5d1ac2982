#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace tempokit {

// Base of every error the toolkit raises on purpose.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Bad values in caller-supplied data: out-of-range numbers, broken
// orderings, coverage violations. Maps to CLI exit code 1.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Scalar outside its documented domain, message names the value.
class RangeError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// Dimension / length mismatch between containers.
class ShapeError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// Input so degenerate the operation has no answer (e.g. zero variance).
class DegenerateInputError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// Malformed text input; carries the 1-based line it was found on.
class ParseError : public ValidationError {
 public:
  ParseError(const std::string& what, std::size_t line)
      : ValidationError("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// A clue or cell reference that does not exist in the matrix.
class ReferenceError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// Template filling with missing placeholder bindings.
class TemplateError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// Gradient descent produced a non-finite loss; carries the step.
class TrainingError : public Error {
 public:
  TrainingError(const std::string& what, std::size_t step)
      : Error("step " + std::to_string(step) + ": " + what), step_(step) {}

  std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

// Filesystem trouble. Maps to CLI exit code 2.
class IoError : public Error {
 public:
  using Error::Error;
};

// Remote LLM transport failure after all retries.
class ClientError : public Error {
 public:
  ClientError(const std::string& what, int retries)
      : Error(what + " (after " + std::to_string(retries) + " retries)"), retries_(retries) {}

  int retries() const { return retries_; }

 private:
  int retries_;
};

}  // namespace tempokit

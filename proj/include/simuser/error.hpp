#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace simuser {

// Base of every error this library throws. Callers that only care about
// "something in the simulator failed" catch this.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IOError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(what + " (line " + std::to_string(line) + ")"), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

class UndefinedAggregateError : public Error {
 public:
  using Error::Error;
};

class SimilarityUndefinedError : public Error {
 public:
  using Error::Error;
};

class EmptyReportError : public Error {
 public:
  using Error::Error;
};

class TrainingDivergedError : public Error {
 public:
  using Error::Error;
};

class NoThumbnailError : public Error {
 public:
  using Error::Error;
};

// LLM-side failures share a base so agent loops can degrade uniformly.
class LlmError : public Error {
 public:
  using Error::Error;
};

class LlmFormatError : public LlmError {
 public:
  using LlmError::LlmError;
};

class LlmTransportError : public LlmError {
 public:
  using LlmError::LlmError;
};

class ScriptExhaustedError : public LlmError {
 public:
  using LlmError::LlmError;
};

}  // namespace simuser

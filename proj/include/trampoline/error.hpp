#pragma once

#include <stdexcept>
#include <string>

namespace tramp {

// Base of everything the library throws.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Caller supplied something malformed: bad file, unknown code, wrong shape.
class InputError : public Error {
public:
  using Error::Error;
};

// Input was fine but a pipeline stage could not produce a result
// (no trampoline found, segmentation failed, ...).
class PipelineError : public Error {
public:
  using Error::Error;
};

class UnknownCodeError : public InputError {
public:
  explicit UnknownCodeError(std::string token)
      : InputError("unknown skill code '" + token + "'"), token_(std::move(token)) {}
  const std::string& token() const noexcept { return token_; }

private:
  std::string token_;
};

class ParseError : public InputError {
public:
  ParseError(const std::string& what, std::size_t line)
      : InputError("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

private:
  std::size_t line_;
};

}  // namespace tramp

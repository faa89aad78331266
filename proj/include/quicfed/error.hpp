#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace quicfed {

// Input that does not follow a documented file format.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : std::runtime_error(what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// A file could not be opened or written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid parameters (non-positive durations, bad fractions, unknown names).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Caller broke an operation's precondition (unsorted input, shape mismatch).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Information estimator limits (joint alphabet too large, non-finite values).
class EstimatorError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace quicfed

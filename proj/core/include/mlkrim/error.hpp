#pragma once

#include <stdexcept>
#include <string>

namespace mlkrim {

// Exception hierarchy. The CLI maps these onto process exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class ParameterError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::size_t offset)
      : Error(what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Numerical failures: degenerate Gram matrices, divergence, violated state.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class StateError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace mlkrim

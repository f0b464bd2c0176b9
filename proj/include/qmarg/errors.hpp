#pragma once

#include <stdexcept>
#include <string>

namespace qmarg {

/// Site index out of range, dimension mismatch between an operator and its shape, etc.
class ShapeError : public std::invalid_argument {
 public:
  explicit ShapeError(const std::string& what) : std::invalid_argument(what) {}
};

/// Input violates a documented invariant (non-Hermitian, wrong trace, duplicate parties...).
class ValidationError : public std::invalid_argument {
 public:
  explicit ValidationError(const std::string& what) : std::invalid_argument(what) {}
};

/// Malformed file content.
class ParseError : public ValidationError {
 public:
  explicit ParseError(const std::string& what) : ValidationError(what) {}
};

/// Non-finite values or a breakdown inside a numerical kernel.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace qmarg

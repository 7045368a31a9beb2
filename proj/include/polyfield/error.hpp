#pragma once

#include <stdexcept>
#include <string>

namespace polyfield {

/// Input violates a documented precondition or invariant.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operands have incompatible shapes (grid sizes, matrix dimensions, vertex counts).
class DimensionError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// File could not be opened, read, written or parsed.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace polyfield

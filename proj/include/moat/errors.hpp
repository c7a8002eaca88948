#pragma once

#include <stdexcept>
#include <string>

namespace moat {

// Parameters, tables or assignments whose shape does not match the domain.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed or out-of-domain input data.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Singular minors, zero-probability evidence, NaN losses.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Exhaustive routines refusing inputs above their size cap.
class CapacityError : public std::length_error {
 public:
  using std::length_error::length_error;
};

}  // namespace moat

#pragma once

#include <stdexcept>
#include <string>

namespace vqakit {

// Malformed or inconsistent input data (files, records, matrices).
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Incompatible matrix or weight shapes.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace vqakit

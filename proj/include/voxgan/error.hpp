#pragma once

#include <stdexcept>
#include <string>

namespace voxgan {

// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Incompatible tensor shapes or invalid axes.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Argument outside its documented domain (alpha outside [0,1], lr <= 0, ...).
class ValueError : public Error {
 public:
  using Error::Error;
};

// A NaN or infinity appeared where a finite value is required.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Malformed files, missing inputs, I/O failures.
class DataError : public Error {
 public:
  using Error::Error;
};

}  // namespace voxgan

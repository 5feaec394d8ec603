#pragma once

#include <stdexcept>
#include <string>

namespace bcnet {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shapes or channel counts that do not line up.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// NaN / non-finite values where finite ones are required.
class NumericError : public Error {
 public:
  using Error::Error;
};

// API misuse: bad arguments, wrong call order.
class UsageError : public Error {
 public:
  using Error::Error;
};

// Corrupt or missing files on disk.
class FormatError : public Error {
 public:
  using Error::Error;
};

class GenerationError : public Error {
 public:
  using Error::Error;
};

class SamplingError : public Error {
 public:
  using Error::Error;
};

}  // namespace bcnet

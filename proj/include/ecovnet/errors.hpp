#pragma once

#include <stdexcept>
#include <string>

namespace ecov {

// Error taxonomy used across the library. Argument/dimension errors signal a
// caller contract violation, data errors cover files and on-disk formats,
// numeric errors abort a run on NaN/Inf.
class ArgumentError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

class DimensionError : public ArgumentError {
public:
  using ArgumentError::ArgumentError;
};

class DataError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class NumericError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

} // namespace ecov

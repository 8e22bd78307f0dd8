#pragma once

#include <stdexcept>
#include <string>

namespace ssampc {

/// Base class for every error raised by the library.
class Error : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/// Matrix or vector shapes do not agree, or an index is out of range.
class DimensionError : public Error
{
public:
  using Error::Error;
};

/// Non-finite input or an internal numerical inconsistency.
class NumericError : public Error
{
public:
  using Error::Error;
};

/// A scalar argument is outside its admissible range.
class ArgumentError : public Error
{
public:
  using Error::Error;
};

/// Not enough samples (or ensemble members) for the requested operation.
class InsufficientDataError : public Error
{
public:
  using Error::Error;
};

/// A reconstruction component with (numerically) zero eigenvalue was requested.
class DegenerateComponentError : public Error
{
public:
  using Error::Error;
};

/// The LRF verticality coefficient reached 1, so no recurrence exists.
class VerticalityError : public Error
{
public:
  using Error::Error;
};

/// Linearization point coincides with the obstacle center.
class DegenerateLinearizationError : public Error
{
public:
  using Error::Error;
};

/// Malformed configuration, CSV or command line.
class ConfigError : public Error
{
public:
  using Error::Error;
};

}  // namespace ssampc

#pragma once

#include <stdexcept>
#include <string>

namespace border_rdd {

//! Base class for every error raised by the library.
class Error : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

//! Malformed input text (grid headers, CSV rows, config lines).
class ParseError : public Error
{
public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
    : Error(source + ":" + std::to_string(line) + ": " + what)
    , line_(line)
  {}
  std::size_t line() const { return line_; }

private:
  std::size_t line_;
};

//! Well-formed input whose parts are inconsistent with each other.
class StructuralError : public Error
{
public:
  using Error::Error;
};

//! Grids that should share georeferencing do not.
class AlignmentError : public Error
{
public:
  using Error::Error;
};

//! Operation not defined for the grid kind (e.g. mode on a continuous grid).
class KindError : public Error
{
public:
  using Error::Error;
};

//! Argument outside the mathematical domain of an operation.
class DomainError : public Error
{
public:
  using Error::Error;
};

class ConfigError : public Error
{
public:
  using Error::Error;
};

class MissingRegionError : public Error
{
public:
  using Error::Error;
};

class EmptySampleError : public Error
{
public:
  using Error::Error;
};

//! Too few observations with nonzero weight on a side of the cutoff.
class InsufficientObservationsError : public Error
{
public:
  using Error::Error;
};

//! The weighted design matrix is rank deficient.
class MulticollinearityError : public Error
{
public:
  using Error::Error;
};

class BandwidthFailureError : public Error
{
public:
  using Error::Error;
};

} // namespace border_rdd

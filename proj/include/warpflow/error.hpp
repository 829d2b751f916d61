#pragma once

#include <stdexcept>
#include <string>

namespace warpflow {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition on an input value was violated (radius outside the
/// ambient domain, negative parameter, non-finite input, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// The requested operation is not defined for the given ambient or surface.
class UnsupportedError : public Error {
 public:
  using Error::Error;
};

/// A spec string or configuration could not be parsed.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Options are individually valid but inconsistent with each other
/// (flow/ambient mismatch, k out of range, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A flow speed was requested outside its admissible curvature cone.
class ConeViolation : public Error {
 public:
  using Error::Error;
};

}  // namespace warpflow

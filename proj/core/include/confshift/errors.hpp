#pragma once

#include <stdexcept>
#include <string>

namespace confshift {

//! Invalid configuration or argument combination (bad k, B = 0, column mismatch, ...).
class ConfigError : public std::invalid_argument
{
public:
  using std::invalid_argument::invalid_argument;
};

//! Input outside the mathematical domain of an operation.
class DomainError : public std::domain_error
{
public:
  using std::domain_error::domain_error;
};

//! Malformed input file content.
class ParseError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

//! Numerical failure, e.g. a singular covariance matrix.
class NumericalError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

//! File could not be opened, read or written.
class IoError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

} // namespace confshift

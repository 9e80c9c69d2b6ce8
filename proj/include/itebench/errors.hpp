#pragma once

#include <stdexcept>
#include <string>

namespace itebench {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidConfig : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

/// A treatment arm with no units where at least one is required.
class EmptyGroupError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class NormalizationError : public Error {
 public:
  using Error::Error;
};

class CapacityError : public Error {
 public:
  using Error::Error;
};

/// Metric has no defined value, e.g. every attribution row is zero.
class UndefinedMetric : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace itebench

// Exception types raised by the infotransfer library.
#pragma once

#include <stdexcept>
#include <string>

namespace infotransfer {

/// Base class for every error thrown by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An argument lies outside its admissible domain (schedule bounds, weights, counts).
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Invalid binary partition: overlapping, empty, or out-of-range index sets.
class PartitionError : public Error {
 public:
  using Error::Error;
};

/// A delta component evaluated at zero noise has no density.
class DegenerateDensityError : public Error {
 public:
  using Error::Error;
};

/// Both partition posteriors vanished numerically.
class UndefinedPosteriorError : public Error {
 public:
  using Error::Error;
};

/// The quadrature grid does not cover the diffused support.
class QuadratureDomainError : public Error {
 public:
  using Error::Error;
};

/// A score model returned a non-finite prediction or could not be evaluated.
class ModelEvaluationError : public Error {
 public:
  using Error::Error;
};

/// Malformed experiment configuration or replay file.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// An output file could not be written.
class OutputError : public Error {
 public:
  using Error::Error;
};

}  // namespace infotransfer

#pragma once

#include <stdexcept>
#include <string>

namespace nlpd {

/// Base of every error raised by the library. The CLI maps the concrete
/// subclasses onto process exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A parameter or argument lies outside its documented domain.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Requested eigen-index exceeds the last discrete eigenvalue N_j.
class SpectrumBoundError : public Error {
 public:
  using Error::Error;
};

/// A numerical procedure (inversion, quadrature, series) did not converge.
class NumericFailure : public Error {
 public:
  using Error::Error;
};

/// Series truncation cannot meet its error target at the configured order.
class TruncationError : public NumericFailure {
 public:
  using NumericFailure::NumericFailure;
};

/// Sampled input is too coarse for the requested operation.
class ResolutionError : public Error {
 public:
  using Error::Error;
};

/// Initial datum is not admissible for the requested expansion.
class DatumError : public Error {
 public:
  using Error::Error;
};

/// Configuration, CLI, or schema problem.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Operation is not available for this combination of inputs.
class UnsupportedError : public Error {
 public:
  using Error::Error;
};

}  // namespace nlpd

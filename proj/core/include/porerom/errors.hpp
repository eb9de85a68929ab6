#pragma once

#include <stdexcept>
#include <string>

namespace porerom {

// Base of every error thrown by the library. Tools map NumericalError
// subclasses to exit code 3 and everything else to exit code 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidSpec : public Error {
 public:
  using Error::Error;
};

class ConnectivityFailure : public Error {
 public:
  using Error::Error;
};

class InvalidBlocks : public Error {
 public:
  using Error::Error;
};

class GeometryError : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class EmptySnapshots : public Error {
 public:
  using Error::Error;
};

class EmptyBasis : public Error {
 public:
  using Error::Error;
};

class NotSymmetric : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Failures of an iterative numerical process.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class SingularMatrix : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class NoConvergence : public NumericalError {
 public:
  NoConvergence(const std::string& what, int iterations, double residual)
      : NumericalError(what), iterations_(iterations), residual_(residual) {}

  int iterations() const { return iterations_; }
  double residual() const { return residual_; }

 private:
  int iterations_;
  double residual_;
};

class NewtonFailure : public NumericalError {
 public:
  NewtonFailure(const std::string& what, int step, double residual)
      : NumericalError(what), step_(step), residual_(residual) {}

  int step() const { return step_; }
  double residual() const { return residual_; }

 private:
  int step_;
  double residual_;
};

class StateInadmissible : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class StagnationError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace porerom

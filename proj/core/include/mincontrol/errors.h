#pragma once

#include <stdexcept>
#include <string>

namespace mincontrol {

// Shape mismatch between operands.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Argument outside the admissible set (t <= 0, empty grids, ...).
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A symmetric matrix had an eigenvalue below -rank_tol * lambda_max.
class NotPsdError : public std::runtime_error {
 public:
  NotPsdError(const std::string& what, double min_eigenvalue)
      : std::runtime_error(what), min_eigenvalue_(min_eigenvalue) {}
  double min_eigenvalue() const { return min_eigenvalue_; }

 private:
  double min_eigenvalue_;
};

// A documented precondition (commutation, range inclusion, projection, ...)
// does not hold.
class PreconditionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Target lies outside the range required by the requested operation.
class ReachabilityError : public std::runtime_error {
 public:
  ReachabilityError(const std::string& what, double defect)
      : std::runtime_error(what), defect_(defect) {}
  double defect() const { return defect_; }

 private:
  double defect_;
};

// Infinite-horizon quantities were requested for a system that is not of
// negative type.
class UnstableSystemError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Explicit integrator could not reach the requested accuracy.
class StiffnessError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// I - e^{tA} K e^{tA} is too close to singular at the requested time.
class MarginError : public std::runtime_error {
 public:
  MarginError(const std::string& what, double margin)
      : std::runtime_error(what), margin_(margin) {}
  double margin() const { return margin_; }

 private:
  double margin_;
};

// Discretization mesh too coarse for the model parameters.
class ResolutionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace mincontrol

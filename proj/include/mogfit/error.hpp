#pragma once

#include <stdexcept>
#include <string>

namespace mogfit {

/// Broad failure classes. The CLI maps these onto exit codes and the
/// service onto HTTP status codes.
enum class ErrorKind {
  validation,   // malformed or inconsistent input
  domain,       // value outside a transformation's domain / support mismatch
  numerical,    // quadrature or solver failed to converge
  divergence,   // an expectation or moment is infinite
  unsupported,  // operation not defined for this kind of input
  degenerate,   // zero density, dead component, etc.
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what)
      : Error(ErrorKind::validation, what) {}
};

class DomainError : public Error {
 public:
  explicit DomainError(const std::string& what)
      : Error(ErrorKind::domain, what) {}
};

class UnsupportedError : public Error {
 public:
  explicit UnsupportedError(const std::string& what)
      : Error(ErrorKind::unsupported, what) {}
};

class DivergenceError : public Error {
 public:
  explicit DivergenceError(const std::string& what)
      : Error(ErrorKind::divergence, what) {}
};

/// Non-convergent numerical procedure. Carries the best estimate reached
/// and its error bound so callers can decide whether it is usable.
class NumericalError : public Error {
 public:
  NumericalError(const std::string& what, double estimate = 0.0,
                 double error_bound = 0.0)
      : Error(ErrorKind::numerical, what),
        estimate_(estimate),
        error_bound_(error_bound) {}

  double estimate() const noexcept { return estimate_; }
  double error_bound() const noexcept { return error_bound_; }

 private:
  double estimate_;
  double error_bound_;
};

class DegenerateError : public Error {
 public:
  explicit DegenerateError(const std::string& what)
      : Error(ErrorKind::degenerate, what) {}
};

/// EM component whose weight underflowed.
class ComponentDeathError : public DegenerateError {
 public:
  ComponentDeathError(std::size_t component, double weight);

  std::size_t component() const noexcept { return component_; }
  double weight() const noexcept { return weight_; }

 private:
  std::size_t component_;
  double weight_;
};

}  // namespace mogfit

#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace partialid {

// Every error carries the module that raised it; what() is "module: message".
class Error : public std::runtime_error {
 public:
  Error(std::string module, const std::string& message)
      : std::runtime_error(module + ": " + message), module_(std::move(module)) {}

  const std::string& module() const noexcept { return module_; }

 private:
  std::string module_;
};

// what() without the leading "module: ".
inline std::string bare_message(const Error& e) {
  return std::string(e.what()).substr(e.module().size() + 2);
}

// Input does not satisfy a documented invariant or precondition.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Malformed file or argument text.
class ParseError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// Estimand undefined for this input (empty stratum, zero denominator).
class DomainError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// The data contradict the maintained assumptions.
class InfeasibleError : public Error {
 public:
  InfeasibleError(std::string module, const std::string& message,
                  std::vector<double> residuals = {},
                  std::vector<std::string> labels = {})
      : Error(std::move(module), message),
        residuals_(std::move(residuals)),
        labels_(std::move(labels)) {}

  // Constraint residuals (A q - b) at the closest point found, one per
  // constraint, when the error comes from a linear program.
  const std::vector<double>& residuals() const noexcept { return residuals_; }
  const std::vector<std::string>& labels() const noexcept { return labels_; }

 private:
  std::vector<double> residuals_;
  std::vector<std::string> labels_;
};

// Optimizer or solver failed to converge, or a variance degenerated.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace partialid

#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace lqpoison {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes are not conformable.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Input violates a documented precondition (dt <= 0, asymmetric matrix, ...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Sampling interval too coarse for the plant: spectral_radius(A) * dt >= 1.
class LearnabilityError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class RankDeficiencyError : public Error {
 public:
  RankDeficiencyError(const std::string& what, long rank, long cols)
      : Error(what), rank_(rank), cols_(cols) {}
  long rank() const { return rank_; }
  long cols() const { return cols_; }

 private:
  long rank_;
  long cols_;
};

/// Batch data does not determine the requested parameters. `directions` holds
/// the (unit) regressor-space directions left unexcited.
class IdentifiabilityError : public Error {
 public:
  IdentifiabilityError(const std::string& what, long rank,
                       std::vector<std::vector<double>> directions = {})
      : Error(what), rank_(rank), directions_(std::move(directions)) {}
  long rank() const { return rank_; }
  const std::vector<std::vector<double>>& directions() const {
    return directions_;
  }

 private:
  long rank_;
  std::vector<std::vector<double>> directions_;
};

/// A fitted quantity violates its structural requirement (e.g. R-hat not PD).
class EstimationError : public Error {
 public:
  using Error::Error;
};

class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double residual)
      : Error(what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

class DivergenceError : public ConvergenceError {
 public:
  using ConvergenceError::ConvergenceError;
};

/// No stabilizing feedback could be certified.
class StabilityError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, long line)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  long line() const { return line_; }

 private:
  long line_;
};

}  // namespace lqpoison

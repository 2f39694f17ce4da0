#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace fpirt {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input data (schema, duplicates, integrity).
class DataError : public Error {
 public:
  using Error::Error;
};

class SchemaError : public DataError {
 public:
  SchemaError(const std::string& what, std::vector<std::string> missing)
      : DataError(what), missing_(std::move(missing)) {}
  const std::vector<std::string>& missing_columns() const { return missing_; }

 private:
  std::vector<std::string> missing_;
};

/// Argument outside the support of a density or function.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Vector or matrix dimensions do not agree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

class InitializationError : public Error {
 public:
  using Error::Error;
};

/// Optimizer stopped before meeting its tolerance; carries the best point found.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, std::vector<double> best, double best_value)
      : Error(what), best_(std::move(best)), best_value_(best_value) {}
  const std::vector<double>& best_point() const { return best_; }
  double best_value() const { return best_value_; }

 private:
  std::vector<double> best_;
  double best_value_;
};

}  // namespace fpirt

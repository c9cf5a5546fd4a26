/**
 * @file error.hpp
 * @brief Exception hierarchy shared by all gmprop modules.
 */
#pragma once

#include <stdexcept>
#include <string>
#include <utility>

#include <Eigen/Dense>

namespace gmprop {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed configuration or input file. Maps to CLI exit code 2.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& field_path, const std::string& what)
      : Error(field_path.empty() ? what : field_path + ": " + what), field_path_(field_path) {}

  [[nodiscard]] const std::string& field_path() const { return field_path_; }

 private:
  std::string field_path_;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Cholesky factorization failed; carries the zero-based pivot where it broke down.
class NotPositiveDefiniteError : public Error {
 public:
  NotPositiveDefiniteError(const std::string& what, int pivot)
      : Error(what + " (failed at pivot " + std::to_string(pivot) + ")"), pivot_(pivot) {}

  [[nodiscard]] int pivot() const { return pivot_; }

 private:
  int pivot_;
};

class SingularMatrixError : public Error {
 public:
  using Error::Error;
};

/// Propagated covariance lost positive definiteness; carries its eigenvalues.
class IndefiniteCovarianceError : public Error {
 public:
  IndefiniteCovarianceError(const std::string& what, Eigen::VectorXd eigenvalues)
      : Error(what), eigenvalues_(std::move(eigenvalues)) {}

  [[nodiscard]] const Eigen::VectorXd& eigenvalues() const { return eigenvalues_; }

 private:
  Eigen::VectorXd eigenvalues_;
};

/// Iterative method ran out of iterations.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, Eigen::VectorXd last_iterate, double residual)
      : Error(what), last_iterate_(std::move(last_iterate)), residual_(residual) {}

  [[nodiscard]] const Eigen::VectorXd& last_iterate() const { return last_iterate_; }
  [[nodiscard]] double residual() const { return residual_; }

 private:
  Eigen::VectorXd last_iterate_;
  double residual_;
};

/// State hit a gravitational singularity (collision with a primary).
class SingularityError : public Error {
 public:
  explicit SingularityError(const std::string& body)
      : Error("state coincides with " + body), body_(body) {}

  [[nodiscard]] const std::string& body() const { return body_; }

 private:
  std::string body_;
};

/// Numerical integration could not continue.
class IntegrationError : public Error {
 public:
  IntegrationError(const std::string& what, double last_good_epoch)
      : Error(what + " (last good epoch " + std::to_string(last_good_epoch) + ")"),
        last_good_epoch_(last_good_epoch) {}

  [[nodiscard]] double last_good_epoch() const { return last_good_epoch_; }

 private:
  double last_good_epoch_;
};

}  // namespace gmprop

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "fpirt/draws.hpp"
#include "fpirt/log_density.hpp"

namespace fpirt {

struct OptimizerConfig {
  std::size_t max_iterations = 20000;
  /// Convergence when the largest absolute gradient entry falls below this.
  double gradient_tolerance = 1e-6;
  /// A stalled line search still counts as converged below this gradient norm.
  double stall_tolerance = 1e-4;
  std::size_t history = 10;
  /// Relative finite-difference step for the Hessian.
  double hessian_step = 1e-5;
};

/// Objective returning f(x) and writing its gradient into g.
using Objective = std::function<double(std::span<const double>, std::span<double>)>;

struct MinimizeResult {
  std::vector<double> x;
  double value = 0.0;
  double gradient_norm = 0.0;
  std::size_t iterations = 0;
};

/// L-BFGS with a strong-Wolfe line search. Throws ConvergenceError carrying the
/// best point when the tolerance is not met.
MinimizeResult lbfgs_minimize(const Objective& f, std::vector<double> x0, const OptimizerConfig& cfg);

struct LaplaceApproximation {
  /// Mode on the unconstrained scale (Jacobian terms included).
  std::vector<double> mode;
  double log_density = 0.0;
  double gradient_norm = 0.0;
  std::size_t iterations = 0;
  /// Inverse of the negated finite-difference Hessian at the mode.
  Eigen::MatrixXd covariance;
};

/// Symmetrised central-difference Hessian of the log density from its gradient.
Eigen::MatrixXd finite_difference_hessian(const LogDensityModel& model, std::span<const double> x, double rel_step);

/// Maximises the log density from `init` (or a random start) and builds the
/// Laplace covariance. Throws DomainError if the Hessian is not negative definite.
LaplaceApproximation map_laplace(const LogDensityModel& model, const OptimizerConfig& cfg,
                                 std::optional<std::vector<double>> init = std::nullopt, std::uint64_t seed = 0);

/// Draws from the Gaussian approximation pushed through the model outputs.
DrawSet laplace_draws(const LogDensityModel& model, const LaplaceApproximation& fit, std::size_t chains,
                      std::size_t per_chain, std::uint64_t seed);

}  // namespace fpirt

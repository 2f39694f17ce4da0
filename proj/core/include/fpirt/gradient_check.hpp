#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "fpirt/log_density.hpp"

namespace fpirt {

struct GradientCheck {
  /// Largest |analytic - numeric| / max(1, |analytic|, |numeric|) over coordinates and points.
  double max_relative_error = 0.0;
  std::size_t worst_point = 0;
  std::size_t worst_coordinate = 0;
  std::size_t points = 0;
};

/// Central differences with step h = 1e-5 * (1 + |x|) at one point.
std::vector<double> numeric_gradient(const LogDensityModel& model, std::span<const double> x);

/// Compares analytic and numeric gradients at `points` uniform draws in [-radius, radius].
GradientCheck check_gradient(const LogDensityModel& model, std::size_t points, std::uint64_t seed,
                             double radius = 1.0);

}  // namespace fpirt

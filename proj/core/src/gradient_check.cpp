#include "fpirt/gradient_check.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "fpirt/math.hpp"
#include "fpirt/nuts.hpp"

namespace fpirt {

std::vector<double> numeric_gradient(const LogDensityModel& model, std::span<const double> x) {
  std::vector<double> xp(x.begin(), x.end()), g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double h = 1e-5 * (1.0 + std::fabs(x[i]));
    xp[i] = x[i] + h;
    const double up = model.log_density(xp, {});
    xp[i] = x[i] - h;
    const double down = model.log_density(xp, {});
    xp[i] = x[i];
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

GradientCheck check_gradient(const LogDensityModel& model, std::size_t points, std::uint64_t seed, double radius) {
  GradientCheck out;
  auto rng = chain_rng(seed, 0);
  std::uniform_real_distribution<double> unif(-radius, radius);
  const std::size_t d = model.dimension();
  std::vector<double> x(d), g(d);
  for (std::size_t p = 0; p < points; ++p) {
    for (double& v : x) v = unif(rng);
    model.log_density(x, g);
    const auto num = numeric_gradient(model, x);
    for (std::size_t i = 0; i < d; ++i) {
      const double err = std::fabs(g[i] - num[i]) / std::max({1.0, std::fabs(g[i]), std::fabs(num[i])});
      if (!(err <= out.max_relative_error)) {
        out.max_relative_error = std::isnan(err) ? kInf : err;
        out.worst_point = p;
        out.worst_coordinate = i;
      }
    }
  }
  out.points = points;
  return out;
}

}  // namespace fpirt

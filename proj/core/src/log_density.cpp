#include "fpirt/log_density.hpp"

#include <algorithm>
#include <cmath>

#include "fpirt/errors.hpp"
#include "fpirt/math.hpp"

namespace fpirt {

void LogDensityModel::write_outputs(std::span<const double> u, std::span<double> out) const {
  space().transform(u, out);
}

std::vector<double> LogDensityModel::outputs(std::span<const double> u) const {
  std::vector<double> out(output_names().size());
  write_outputs(u, out);
  return out;
}

double ConstrainedLogDensity::log_density(std::span<const double> u, std::span<double> grad) const {
  std::vector<double> c(space_.constrained_dim());
  const double log_jac = space_.transform(u, c);
  for (double v : c) {
    if (!std::isfinite(v)) {
      std::fill(grad.begin(), grad.end(), 0.0);
      return kNegInf;
    }
  }
  std::vector<double> gc(grad.empty() ? 0 : c.size(), 0.0);
  double lp;
  try {
    lp = log_density_constrained(c, gc);
  } catch (const DomainError&) {
    std::fill(grad.begin(), grad.end(), 0.0);
    return kNegInf;
  }
  if (!grad.empty()) {
    if (grad.size() != u.size()) throw ShapeError("gradient buffer has wrong length");
    space_.backprop(u, c, gc, grad);
  }
  return lp + log_jac;
}

}  // namespace fpirt

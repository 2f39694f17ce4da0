#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "fpirt/parameter_space.hpp"

namespace fpirt {

/// A differentiable log density on the unconstrained space of a ParameterSpace.
/// Implementations must be reentrant: chains evaluate concurrently.
class LogDensityModel {
 public:
  virtual ~LogDensityModel() = default;

  virtual const ParameterSpace& space() const = 0;
  std::size_t dimension() const { return space().unconstrained_dim(); }

  /// Log density including transform Jacobians. Fills `grad` when it is
  /// non-empty. Returns -inf outside the support.
  virtual double log_density(std::span<const double> unconstrained, std::span<double> grad) const = 0;

  /// Columns recorded per draw. Defaults to the constrained parameters.
  virtual std::vector<std::string> output_names() const { return space().element_names(); }
  virtual void write_outputs(std::span<const double> unconstrained, std::span<double> out) const;
  std::vector<double> outputs(std::span<const double> unconstrained) const;
};

/// Model written on the constrained scale; the base handles transforms,
/// Jacobians, and the chain rule back to the unconstrained space.
class ConstrainedLogDensity : public LogDensityModel {
 public:
  const ParameterSpace& space() const override { return space_; }
  double log_density(std::span<const double> unconstrained, std::span<double> grad) const final;

  /// Value and gradient on the constrained scale, without Jacobian terms.
  double evaluate_constrained(std::span<const double> constrained, std::span<double> grad_constrained) const {
    return log_density_constrained(constrained, grad_constrained);
  }

 protected:
  /// `grad` is zero-initialised with the constrained length, or empty when
  /// no gradient is requested.
  virtual double log_density_constrained(std::span<const double> constrained,
                                         std::span<double> grad) const = 0;

  ParameterSpace space_;
};

/// Adapter for ad-hoc targets (tests, benchmarks, toy problems).
class FunctionLogDensity final : public ConstrainedLogDensity {
 public:
  using Fn = std::function<double(std::span<const double>, std::span<double>)>;
  FunctionLogDensity(ParameterSpace space, Fn fn) : fn_(std::move(fn)) { space_ = std::move(space); }

 protected:
  double log_density_constrained(std::span<const double> c, std::span<double> g) const override {
    return fn_(c, g);
  }

 private:
  Fn fn_;
};

/// Interface shared by the shipped posteriors for model comparison.
class PosteriorModel : public ConstrainedLogDensity {
 public:
  /// Short model tag ("rasch", "joint", "irtree", ...).
  virtual std::string kind() const = 0;

  virtual std::size_t n_observations() const = 0;

  /// Per-observation log likelihood given one row of outputs.
  virtual void pointwise_log_lik(std::span<const double> outputs, std::span<double> out) const = 0;

  /// Observed category per observation on the comparison scale.
  virtual std::vector<int> observed_categories() const = 0;

  /// Modal predicted category per observation given a row of outputs.
  virtual std::vector<int> predicted_categories(std::span<const double> outputs) const = 0;
};

}  // namespace fpirt

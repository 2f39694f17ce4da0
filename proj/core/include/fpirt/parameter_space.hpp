#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fpirt {

enum class Constraint {
  Free,
  Positive,            ///< exp
  OrderedIncreasing,   ///< first coordinate free, then exp increments
  CorrelationCholesky, ///< K x K lower-triangular factor with unit-norm rows
  UnitScaledPositive,  ///< positive vector whose logs sum to zero (product one)
};

std::string_view to_string(Constraint c);

/// A named parameter block. Shape {} is a scalar, {n} a vector, {r, c} a
/// row-major matrix. CorrelationCholesky blocks have shape {K, K}.
struct Block {
  std::string name;
  std::vector<std::size_t> shape;
  Constraint constraint = Constraint::Free;
  std::size_t constrained_offset = 0;
  std::size_t unconstrained_offset = 0;

  std::size_t size() const;
  std::size_t unconstrained_size() const;
};

struct TransformResult {
  std::vector<double> values;
  double log_jacobian = 0.0;
};

/// Ordered list of constrained parameter blocks and the bijection to R^n.
///
/// The log Jacobian for UnitScaledPositive is taken with respect to the log
/// coordinates of the first K-1 elements, where the map is the identity, so a
/// density placed on log values needs no correction.
class ParameterSpace {
 public:
  /// Returns the block index.
  std::size_t add(std::string name, std::vector<std::size_t> shape, Constraint c = Constraint::Free);

  const std::vector<Block>& blocks() const { return blocks_; }
  const Block& block(std::size_t index) const { return blocks_.at(index); }
  const Block& block(std::string_view name) const;
  std::size_t index_of(std::string_view name) const;

  std::size_t unconstrained_dim() const { return unconstrained_dim_; }
  std::size_t constrained_dim() const { return constrained_dim_; }

  /// Throws ShapeError on a length mismatch.
  TransformResult transform(std::span<const double> unconstrained) const;
  double transform(std::span<const double> unconstrained, std::span<double> constrained) const;

  /// Throws DomainError when a value is outside its constraint set.
  std::vector<double> untransform(std::span<const double> constrained) const;

  /// grad_unconstrained = J' * grad_constrained + d(log_jacobian)/du.
  void backprop(std::span<const double> unconstrained, std::span<const double> constrained,
                std::span<const double> grad_constrained, std::span<double> grad_unconstrained) const;

  /// Element labels in constrained order: "x", "x[3]", "x[2,1]" (1-based).
  std::vector<std::string> element_names() const;

 private:
  std::vector<Block> blocks_;
  std::size_t unconstrained_dim_ = 0;
  std::size_t constrained_dim_ = 0;
};

/// Correlation Cholesky factor of size K from K(K-1)/2 unconstrained values
/// (row-major order of the strict lower triangle). Writes K*K row-major
/// entries to `factor` and returns the log Jacobian of the map to the strict
/// lower-triangle entries.
double corr_cholesky_transform(std::span<const double> y, std::size_t K, std::span<double> factor);
std::vector<double> corr_cholesky_untransform(std::span<const double> factor, std::size_t K);

}  // namespace fpirt

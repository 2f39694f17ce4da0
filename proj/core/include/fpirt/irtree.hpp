#pragma once

#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "fpirt/data.hpp"
#include "fpirt/draws.hpp"
#include "fpirt/log_density.hpp"
#include "fpirt/tree.hpp"

namespace fpirt {

/// Person and item parameters per tree node, row-major [N x K] and [J x K].
struct IRTreeParams {
  std::size_t K = 0;
  std::vector<double> theta;
  std::vector<double> b;
  std::vector<double> beta0;
  std::vector<double> beta1;
  std::vector<double> sigma_theta;
  std::vector<double> sigma_b;
  std::vector<double> L_theta;  ///< K*K row-major correlation Cholesky factor
  std::vector<double> L_b;

  std::span<const double> theta_row(std::size_t i) const { return {theta.data() + i * K, K}; }
  std::span<const double> b_row(std::size_t j) const { return {b.data() + j * K, K}; }
};

/// Sum of leaf log probabilities over observations (categories are leaf codes).
/// Order-invariant summation.
double irtree_loglik(const IRTreeParams& p, const CategoricalData& data, const TreeSpec& tree);

struct IRTreePriors {
  double lkj_eta = 4.0;
  double half_cauchy_scale = 2.5;
  double beta_sd = 1.0;
};

/// theta_i = diag(sigma_theta) L_theta z_i and b_j = beta0 + beta1 X_j +
/// diag(sigma_b) L_b w_j with standard normal z, w. X_j is the item's mating indicator.
/// Pointwise likelihood and predictions are on the tree's grouped scale.
class IRTreePosterior final : public PosteriorModel {
 public:
  IRTreePosterior(CategoricalData data, TreeSpec tree, IRTreePriors priors = {}, std::string kind = "irtree");

  std::string kind() const override { return kind_; }
  std::vector<std::string> output_names() const override;
  void write_outputs(std::span<const double> u, std::span<double> out) const override;

  std::size_t n_observations() const override { return data_.observations.size(); }
  void pointwise_log_lik(std::span<const double> outputs, std::span<double> out) const override;
  std::vector<int> observed_categories() const override;
  std::vector<int> predicted_categories(std::span<const double> outputs) const override;

  const CategoricalData& data() const { return data_; }
  const TreeSpec& tree() const { return tree_; }
  IRTreeParams params_from_outputs(std::span<const double> outputs) const;
  std::vector<double> unconstrained_from(const IRTreeParams& p) const;

 protected:
  double log_density_constrained(std::span<const double> c, std::span<double> grad) const override;

 private:
  IRTreeParams params_from_constrained(std::span<const double> c) const;

  CategoricalData data_;
  TreeSpec tree_;
  IRTreePriors priors_;
  std::string kind_;
  std::size_t K_;
  std::size_t z_theta_, sigma_theta_, L_theta_, z_b_, sigma_b_, L_b_, beta0_, beta1_;
};

/// Person and item parameter medians extracted from a tree fit's draws.
struct TreeMedians {
  std::size_t K = 0;
  std::vector<double> theta;  ///< [N x K]
  std::vector<double> b;      ///< [J x K]
};
TreeMedians tree_medians(const DrawSet& draws, std::size_t n_examiners, std::size_t n_items, std::size_t K);

struct UnexpectedResponse {
  std::string examiner_id;
  std::string item_id;
  int observed = 0;
  int predicted = 0;
  std::vector<double> probabilities;  ///< per leaf
  bool flagged = false;
};

/// Leaf probabilities at posterior medians for every observation; `flagged` when the
/// observation differs from the most likely leaf and that leaf has probability >= threshold.
std::vector<UnexpectedResponse> flag_unexpected(const DrawSet& draws, const CategoricalData& data,
                                                const TreeSpec& tree, double threshold = 0.5);

/// Writes flagged rows only unless `all` is set.
void write_flags_csv(const std::vector<UnexpectedResponse>& rows, const TreeSpec& tree, std::ostream& out,
                     bool all = false);

struct CoefficientRow {
  int node = 0;  ///< 1-based
  std::string parameter;
  double mean = 0.0;
  double median = 0.0;
  double q5 = 0.0;
  double q95 = 0.0;
};

/// beta0, beta1, sigma_theta, sigma_b per node with 90% intervals.
std::vector<CoefficientRow> coefficient_table(const DrawSet& draws, std::size_t K);
void write_coefficients_csv(const std::vector<CoefficientRow>& rows, std::ostream& out);

}  // namespace fpirt

#pragma once

#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "fpirt/data.hpp"
#include "fpirt/draws.hpp"
#include "fpirt/log_density.hpp"

namespace fpirt {

struct RaschParams {
  std::vector<double> theta;
  std::vector<double> b;
  double mu_b = 0.0;
  double sigma_theta = 1.0;
  double sigma_b = 1.0;
};

/// Bernoulli-logit log likelihood over the observed entries, P(y=1) = inv_logit(theta_i - b_j).
/// Order-invariant summation. Throws ShapeError on dimension mismatch.
double rasch_loglik(const RaschParams& p, const ScoredMatrix& m);

/// Adds d/dtheta and d/db of the log likelihood into the gradient buffers and
/// returns the log likelihood (plain summation, for the hot path).
double rasch_loglik_grad(std::span<const double> theta, std::span<const double> b,
                         std::span<const ScoredEntry> entries, std::span<double> d_theta, std::span<double> d_b);

struct RaschPriors {
  double mu_b_sd = 10.0;
  double half_cauchy_scale = 2.5;
  /// Fixed values remove the corresponding block from the parameter space.
  std::optional<double> fixed_mu_b;
  std::optional<double> fixed_sigma_theta;
  std::optional<double> fixed_sigma_b;
};

/// theta = sigma_theta * z_theta and b = mu_b + sigma_b * z_b with standard
/// normal z. Outputs: theta[i], b[j], then any sampled hyperparameters.
class RaschPosterior final : public PosteriorModel {
 public:
  /// Throws DataError when the matrix has no entries.
  explicit RaschPosterior(ScoredMatrix data, RaschPriors priors = {});

  std::string kind() const override { return "rasch"; }
  std::vector<std::string> output_names() const override;
  void write_outputs(std::span<const double> u, std::span<double> out) const override;

  std::size_t n_observations() const override { return data_.entries.size(); }
  void pointwise_log_lik(std::span<const double> outputs, std::span<double> out) const override;
  std::vector<int> observed_categories() const override;
  std::vector<int> predicted_categories(std::span<const double> outputs) const override;

  const ScoredMatrix& data() const { return data_; }
  RaschParams params_from_outputs(std::span<const double> outputs) const;
  /// Unconstrained point reproducing the given parameters.
  std::vector<double> unconstrained_from(const RaschParams& p) const;

 protected:
  double log_density_constrained(std::span<const double> c, std::span<double> grad) const override;

 private:
  ScoredMatrix data_;
  RaschPriors priors_;
  std::size_t z_theta_, z_b_;
  std::optional<std::size_t> mu_b_, sigma_theta_, sigma_b_;
};

struct ProficiencyRow {
  std::string examiner_id;
  double theta_mean = 0.0;
  double theta_median = 0.0;
  double q2_5 = 0.0;
  double q97_5 = 0.0;
  double observed_score = 0.0;
  std::optional<double> fpr;
  std::optional<double> fnr;
  std::size_t n_conclusive = 0;
  std::size_t n_responses = 0;
};

/// Joins theta[i] summaries with per-examiner observed statistics from the raw records.
std::vector<ProficiencyRow> proficiency_report(const DrawSet& draws, const ScoredMatrix& m,
                                               std::span<const ResponseRecord> records);

void write_proficiency_csv(const std::vector<ProficiencyRow>& rows, std::ostream& out);

}  // namespace fpirt

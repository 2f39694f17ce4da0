#pragma once

#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "fpirt/data.hpp"
#include "fpirt/draws.hpp"
#include "fpirt/log_density.hpp"

namespace fpirt {

inline constexpr std::size_t kDifficultyCutpoints = 4;

struct JointParams {
  std::vector<double> theta;
  std::vector<double> b;
  double g = 1.0;
  std::vector<double> h;
  std::vector<double> f;
  std::vector<double> gamma;  ///< 4 increasing cutpoints
  double mu_b = 0.0;
  double sigma_theta = 1.0;
  double sigma_b = 1.0;
  double sigma_h = 1.0;
  double sigma_f = 1.0;
};

/// Linear predictor of the reported-difficulty category.
inline double difficulty_eta(const JointParams& p, std::size_t i, std::size_t j) {
  return p.g * (p.theta[i] - p.b[j]) + p.h[i] + p.f[j];
}

/// Rasch term over scored entries plus the ordered-logit term over difficulty
/// reports. Order-invariant summation.
double joint_loglik(const JointParams& p, const JointData& d);

struct JointPriors {
  double mu_b_sd = 10.0;
  double half_cauchy_scale = 2.5;
  double g_sd = 5.0;
  /// Normal(0, gamma_sd) on each ordered cutpoint value.
  double gamma_sd = 5.0;
};

/// Non-centred throughout: theta, b, h, f are location + scale * standard normal.
class JointPosterior final : public PosteriorModel {
 public:
  explicit JointPosterior(JointData data, JointPriors priors = {});

  std::string kind() const override { return "joint"; }
  std::vector<std::string> output_names() const override;
  void write_outputs(std::span<const double> u, std::span<double> out) const override;

  /// Scored entries first, then difficulty reports.
  std::size_t n_observations() const override;
  void pointwise_log_lik(std::span<const double> outputs, std::span<double> out) const override;
  std::vector<int> observed_categories() const override;
  std::vector<int> predicted_categories(std::span<const double> outputs) const override;

  const JointData& data() const { return data_; }
  JointParams params_from_outputs(std::span<const double> outputs) const;
  std::vector<double> unconstrained_from(const JointParams& p) const;

 protected:
  double log_density_constrained(std::span<const double> c, std::span<double> grad) const override;

 private:
  JointParams params_from_constrained(std::span<const double> c) const;

  JointData data_;
  JointPriors priors_;
  std::size_t z_theta_, z_b_, mu_b_, sigma_theta_, sigma_b_, g_, z_h_, sigma_h_, z_f_, sigma_f_, gamma_;
};

struct BiasRow {
  std::string kind;  ///< "examiner" (h) or "item" (f)
  std::string id;
  double mean = 0.0;
  double median = 0.0;
  double q2_5 = 0.0;
  double q97_5 = 0.0;
  bool excludes_zero = false;
};

/// Summaries of h[i] and f[j] with 95% intervals.
std::vector<BiasRow> reporting_bias_report(const DrawSet& draws, const JointData& d);
void write_bias_csv(const std::vector<BiasRow>& rows, std::ostream& out);

struct PredictedObservedRow {
  std::string examiner_id;
  std::size_t n_scored = 0;
  double observed_score = 0.0;
  double predicted_score = 0.0;
  std::size_t n_reports = 0;
  double observed_mean_difficulty = 0.0;
  double predicted_mean_difficulty = 0.0;
};

/// Posterior-mean predicted score and expected reported difficulty per examiner.
std::vector<PredictedObservedRow> predicted_vs_observed(const DrawSet& draws, const JointData& d);
void write_predicted_observed_csv(const std::vector<PredictedObservedRow>& rows, std::ostream& out);

}  // namespace fpirt

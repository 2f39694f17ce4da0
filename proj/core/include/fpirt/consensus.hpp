#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fpirt/data.hpp"
#include "fpirt/log_density.hpp"

namespace fpirt {

// Latent-truth rating models on the three-category conclusiveness scale.
// Categories are 0-based codes (NoValue, Inconclusive, Conclusive); the two
// boundaries per examiner are delta_c = a_i * gamma_c + b_i.

inline constexpr std::size_t kConsensusBoundaries = 2;

enum class ConsensusVariant { LTRM, CLTRM, ALTRM };

std::string_view to_string(ConsensusVariant v);
/// Accepts "ltrm", "cltrm", "altrm" (case-insensitive, dashes ignored).
ConsensusVariant parse_consensus_variant(std::string_view token);

struct LTRMParams {
  std::vector<double> T;       ///< [J]
  std::array<double, 2> gamma{-1.0, 1.0};
  std::vector<double> a;       ///< [N], positive
  std::vector<double> b;       ///< [N]
  std::vector<double> E;       ///< [N], LTRM only
  std::vector<double> lambda;  ///< [J], LTRM only
};

/// delta = a * gamma + b. Throws DomainError when a <= 0 or gamma is not increasing.
std::array<double, 2> thresholds(double a, double b, std::span<const double> gamma);

/// Probit: P(Y <= c) = Phi((delta_c - T) * sqrt(tau)).
std::array<double, 3> ltrm_probs(double T, double tau, const std::array<double, 2>& delta);
/// Cumulative logits: P(Y <= c) = inv_logit(delta_c - T).
std::array<double, 3> cltrm_probs(double T, const std::array<double, 2>& delta);
/// Adjacent categories: log P(Y = c-1) / P(Y = c) = delta_c - T.
std::array<double, 3> altrm_probs(double T, const std::array<double, 2>& delta);

/// Log-likelihood sums (order-invariant). Categories come from `data`; E and
/// lambda are used by the LTRM only. Throws ShapeError on a dimension mismatch.
double ltrm_loglik(const LTRMParams& p, const CategoricalData& data);
double cltrm_loglik(const LTRMParams& p, const CategoricalData& data);
double altrm_loglik(const LTRMParams& p, const CategoricalData& data);
double consensus_loglik(ConsensusVariant v, const LTRMParams& p, const CategoricalData& data);

struct ConsensusPriors {
  double T_sd = 2.0;
  double gamma_sd = 2.0;
  double a_log_sd = 0.5;
  double half_cauchy_scale = 2.5;
  double E_log_sd = 1.0;
  double lambda_log_sd = 1.0;
};

/// b = sigma_b * z_b. The LTRM adds competence E and item difficulty lambda,
/// with lambda constrained to have product one.
class ConsensusPosterior final : public PosteriorModel {
 public:
  ConsensusPosterior(CategoricalData data, ConsensusVariant variant, ConsensusPriors priors = {});

  std::string kind() const override;
  std::vector<std::string> output_names() const override;
  void write_outputs(std::span<const double> u, std::span<double> out) const override;

  std::size_t n_observations() const override { return data_.observations.size(); }
  void pointwise_log_lik(std::span<const double> outputs, std::span<double> out) const override;
  std::vector<int> observed_categories() const override;
  std::vector<int> predicted_categories(std::span<const double> outputs) const override;

  ConsensusVariant variant() const { return variant_; }
  const CategoricalData& data() const { return data_; }
  LTRMParams params_from_outputs(std::span<const double> outputs) const;
  std::vector<double> unconstrained_from(const LTRMParams& p, double sigma_b) const;

 protected:
  double log_density_constrained(std::span<const double> c, std::span<double> grad) const override;

 private:
  std::array<double, 3> cell_probs(const LTRMParams& p, std::size_t i, std::size_t j) const;

  CategoricalData data_;
  ConsensusVariant variant_;
  ConsensusPriors priors_;
  std::size_t T_, gamma_, a_, z_b_, sigma_b_;
  std::optional<std::size_t> E_, lambda_;
};

}  // namespace fpirt

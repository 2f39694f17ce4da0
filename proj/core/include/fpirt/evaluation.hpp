#pragma once

#include <cstddef>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "fpirt/data.hpp"
#include "fpirt/draws.hpp"
#include "fpirt/log_density.hpp"

namespace fpirt {

struct ErrorRates {
  std::size_t total = 0;
  std::size_t no_value = 0;
  std::size_t inconclusive = 0;
  std::size_t individualizations = 0;
  std::size_t exclusions = 0;
  std::size_t false_positives = 0;     ///< individualizations on non-mates
  std::size_t nonmate_conclusive = 0;  ///< individualizations + exclusions on non-mates
  std::size_t false_negatives = 0;     ///< exclusions on mates
  std::size_t mate_conclusive = 0;
  /// Absent when the denominator is zero.
  std::optional<double> fpr;
  std::optional<double> fnr;
};

ErrorRates error_rates(std::span<const ResponseRecord> records);

struct WaicResult {
  double waic = 0.0;
  double se = 0.0;
  double lppd = 0.0;
  double p_waic = 0.0;
  std::size_t n_observations = 0;
  std::size_t n_draws = 0;
};

/// WAIC on the deviance scale from a [draw x observation] log-likelihood matrix.
/// Throws DomainError with fewer than two draws or non-finite entries.
WaicResult waic(const Eigen::MatrixXd& loglik);

/// Streams draws one at a time: per-observation running log-sum-exp and variance.
class WaicAccumulator {
 public:
  explicit WaicAccumulator(std::size_t n_observations);
  void add_draw(std::span<const double> loglik);
  std::size_t draws() const { return draws_; }
  WaicResult result() const;

 private:
  std::size_t draws_ = 0;
  std::vector<double> max_, scaled_sum_, mean_, m2_;
};

/// Streams every draw of `draws` through the model's pointwise log likelihood.
WaicResult waic(const PosteriorModel& model, const DrawSet& draws);

/// Fraction of positions where observed != predicted.
double prediction_error(std::span<const int> observed, std::span<const int> predicted);

/// Modal prediction at the posterior-median outputs.
double prediction_error(const PosteriorModel& model, const DrawSet& draws);

struct PredictiveScore {
  std::string examiner_id;
  std::size_t n_items = 0;
  double observed = 0.0;
  double predicted = 0.0;
  double q2_5 = 0.0;
  double q97_5 = 0.0;
};

/// Uses the theta[i] and b[j] outputs of a Rasch or joint fit.
std::vector<PredictiveScore> posterior_predictive_scores(const DrawSet& draws, const ScoredMatrix& m);

void write_predictive_scores_csv(const std::vector<PredictiveScore>& rows, std::ostream& out);

}  // namespace fpirt

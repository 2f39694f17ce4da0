#include "fpirt/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fpirt/csv.hpp"
#include "fpirt/errors.hpp"
#include "fpirt/math.hpp"

namespace fpirt {

ErrorRates error_rates(std::span<const ResponseRecord> records) {
  ErrorRates r;
  for (const auto& rec : records) {
    ++r.total;
    if (!rec.has_value()) {
      ++r.no_value;
      continue;
    }
    const bool mates = rec.mating == Mating::Mates;
    switch (rec.compare_value) {
      case CompareValue::Inconclusive:
        ++r.inconclusive;
        break;
      case CompareValue::Individualization:
        ++r.individualizations;
        if (mates) {
          ++r.mate_conclusive;
        } else {
          ++r.nonmate_conclusive;
          ++r.false_positives;
        }
        break;
      case CompareValue::Exclusion:
        ++r.exclusions;
        if (mates) {
          ++r.mate_conclusive;
          ++r.false_negatives;
        } else {
          ++r.nonmate_conclusive;
        }
        break;
      case CompareValue::None:
        break;
    }
  }
  if (r.nonmate_conclusive > 0) {
    r.fpr = static_cast<double>(r.false_positives) / static_cast<double>(r.nonmate_conclusive);
  }
  if (r.mate_conclusive > 0) {
    r.fnr = static_cast<double>(r.false_negatives) / static_cast<double>(r.mate_conclusive);
  }
  return r;
}

namespace {

WaicResult finish(std::span<const double> lppd_i, std::span<const double> var_i, std::size_t draws) {
  WaicResult w;
  w.n_observations = lppd_i.size();
  w.n_draws = draws;
  std::vector<double> lppd_terms(lppd_i.begin(), lppd_i.end());
  std::vector<double> p_terms(var_i.begin(), var_i.end());
  std::vector<double> pointwise(lppd_i.size());
  for (std::size_t i = 0; i < lppd_i.size(); ++i) pointwise[i] = -2.0 * (lppd_i[i] - var_i[i]);
  w.lppd = order_invariant_sum(lppd_terms);
  w.p_waic = order_invariant_sum(p_terms);
  w.waic = -2.0 * (w.lppd - w.p_waic);
  const double n = static_cast<double>(pointwise.size());
  if (pointwise.size() > 1) {
    const double mean = order_invariant_sum(pointwise) / n;
    std::vector<double> sq(pointwise.size());
    for (std::size_t i = 0; i < sq.size(); ++i) sq[i] = (pointwise[i] - mean) * (pointwise[i] - mean);
    w.se = std::sqrt(n * order_invariant_sum(sq) / (n - 1.0));
  }
  return w;
}

}  // namespace

WaicResult waic(const Eigen::MatrixXd& loglik) {
  const auto S = loglik.rows();
  const auto n = loglik.cols();
  if (S < 2) throw DomainError("WAIC needs at least two draws");
  if (!loglik.allFinite()) throw DomainError("pointwise log likelihood has non-finite entries");
  std::vector<double> lppd(static_cast<std::size_t>(n)), var(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    std::vector<double> col(static_cast<std::size_t>(S));
    for (Eigen::Index s = 0; s < S; ++s) col[static_cast<std::size_t>(s)] = loglik(s, i);
    lppd[static_cast<std::size_t>(i)] = log_sum_exp(col) - std::log(static_cast<double>(S));
    const double mean = std::accumulate(col.begin(), col.end(), 0.0) / static_cast<double>(S);
    double ss = 0.0;
    for (double v : col) ss += (v - mean) * (v - mean);
    var[static_cast<std::size_t>(i)] = ss / static_cast<double>(S - 1);
  }
  return finish(lppd, var, static_cast<std::size_t>(S));
}

WaicAccumulator::WaicAccumulator(std::size_t n)
    : max_(n, kNegInf), scaled_sum_(n, 0.0), mean_(n, 0.0), m2_(n, 0.0) {}

void WaicAccumulator::add_draw(std::span<const double> ll) {
  if (ll.size() != max_.size()) throw ShapeError("draw has the wrong number of observations");
  ++draws_;
  const double k = static_cast<double>(draws_);
  for (std::size_t i = 0; i < ll.size(); ++i) {
    const double v = ll[i];
    if (!std::isfinite(v)) throw DomainError("pointwise log likelihood has non-finite entries");
    if (v > max_[i]) {
      scaled_sum_[i] = scaled_sum_[i] * std::exp(max_[i] - v) + 1.0;
      max_[i] = v;
    } else {
      scaled_sum_[i] += std::exp(v - max_[i]);
    }
    const double delta = v - mean_[i];
    mean_[i] += delta / k;
    m2_[i] += delta * (v - mean_[i]);
  }
}

WaicResult WaicAccumulator::result() const {
  if (draws_ < 2) throw DomainError("WAIC needs at least two draws");
  const double S = static_cast<double>(draws_);
  std::vector<double> lppd(max_.size()), var(max_.size());
  for (std::size_t i = 0; i < max_.size(); ++i) {
    lppd[i] = max_[i] + std::log(scaled_sum_[i]) - std::log(S);
    var[i] = m2_[i] / (S - 1.0);
  }
  return finish(lppd, var, draws_);
}

WaicResult waic(const PosteriorModel& model, const DrawSet& draws) {
  WaicAccumulator acc(model.n_observations());
  std::vector<double> ll(model.n_observations());
  for (std::size_t c = 0; c < draws.n_chains(); ++c) {
    for (std::size_t i = 0; i < draws.n_iterations(); ++i) {
      model.pointwise_log_lik(draws.row(c, i), ll);
      acc.add_draw(ll);
    }
  }
  return acc.result();
}

double prediction_error(std::span<const int> observed, std::span<const int> predicted) {
  if (observed.size() != predicted.size()) throw ShapeError("observed and predicted lengths differ");
  if (observed.empty()) return 0.0;
  std::size_t miss = 0;
  for (std::size_t i = 0; i < observed.size(); ++i) miss += observed[i] != predicted[i] ? 1 : 0;
  return static_cast<double>(miss) / static_cast<double>(observed.size());
}

double prediction_error(const PosteriorModel& model, const DrawSet& draws) {
  const auto medians = posterior_medians(draws);
  return prediction_error(model.observed_categories(), model.predicted_categories(medians));
}

std::vector<PredictiveScore> posterior_predictive_scores(const DrawSet& draws, const ScoredMatrix& m) {
  std::vector<std::size_t> theta_col(m.n_examiners()), b_col(m.n_items());
  for (std::size_t i = 0; i < m.n_examiners(); ++i) theta_col[i] = draws.index("theta[" + std::to_string(i + 1) + "]");
  for (std::size_t j = 0; j < m.n_items(); ++j) b_col[j] = draws.index("b[" + std::to_string(j + 1) + "]");

  std::vector<std::vector<const ScoredEntry*>> by_examiner(m.n_examiners());
  for (const auto& e : m.entries) by_examiner[e.examiner].push_back(&e);

  std::vector<PredictiveScore> out;
  out.reserve(m.n_examiners());
  const std::size_t S = draws.n_chains() * draws.n_iterations();
  std::vector<double> per_draw(S);
  for (std::size_t i = 0; i < m.n_examiners(); ++i) {
    PredictiveScore row;
    row.examiner_id = m.examiners.id(i);
    row.n_items = by_examiner[i].size();
    if (row.n_items == 0) continue;
    for (const auto* e : by_examiner[i]) row.observed += e->y;
    row.observed /= static_cast<double>(row.n_items);
    std::size_t s = 0;
    for (std::size_t c = 0; c < draws.n_chains(); ++c) {
      for (std::size_t it = 0; it < draws.n_iterations(); ++it, ++s) {
        const auto r = draws.row(c, it);
        double acc = 0.0;
        for (const auto* e : by_examiner[i]) acc += inv_logit(r[theta_col[i]] - r[b_col[e->item]]);
        per_draw[s] = acc / static_cast<double>(row.n_items);
      }
    }
    row.predicted = std::accumulate(per_draw.begin(), per_draw.end(), 0.0) / static_cast<double>(S);
    row.q2_5 = quantile(per_draw, 0.025);
    row.q97_5 = quantile(per_draw, 0.975);
    out.push_back(std::move(row));
  }
  return out;
}

void write_predictive_scores_csv(const std::vector<PredictiveScore>& rows, std::ostream& out) {
  CsvWriter w(out);
  w.row({"examiner_id", "n_items", "observed_score", "predicted_score", "q2.5", "q97.5"});
  for (const auto& r : rows) {
    w.row({r.examiner_id, std::to_string(r.n_items), format_double(r.observed), format_double(r.predicted),
           format_double(r.q2_5), format_double(r.q97_5)});
  }
}

}  // namespace fpirt

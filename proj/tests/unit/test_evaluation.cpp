#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "fixtures.hpp"
#include "fpirt/errors.hpp"
#include "fpirt/evaluation.hpp"
#include "fpirt/math.hpp"
#include "fpirt/rasch.hpp"
#include "oracles.hpp"

namespace fpirt {
namespace {

using testing::exclusion;
using testing::inconclusive;
using testing::individualization;
using testing::no_value;

TEST(ErrorRates, HandCountedToy) {
  // Five non-mate conclusives, one of them a false individualization.
  std::vector<ResponseRecord> r;
  for (int k = 0; k < 4; ++k) r.push_back(exclusion("E" + std::to_string(k), "N1", Mating::NonMates));
  r.push_back(individualization("E9", "N1", Mating::NonMates));
  r.push_back(individualization("E1", "M1"));
  r.push_back(individualization("E2", "M1"));
  r.push_back(exclusion("E3", "M1", Mating::Mates));
  r.push_back(inconclusive("E4", "M1"));
  r.push_back(no_value("E5", "M1"));
  const auto e = error_rates(r);
  EXPECT_EQ(e.total, 10u);
  EXPECT_DOUBLE_EQ(*e.fpr, 0.2);
  EXPECT_DOUBLE_EQ(*e.fnr, 1.0 / 3.0);
  // Numerators and denominators recomputed from category counts.
  EXPECT_EQ(e.individualizations + e.exclusions + e.inconclusive + e.no_value, e.total);
  EXPECT_EQ(e.nonmate_conclusive + e.mate_conclusive, e.individualizations + e.exclusions);
}

TEST(ErrorRates, NoErrorsAndEmptyDenominators) {
  const auto e = error_rates(std::vector<ResponseRecord>{individualization("E1", "M1"),
                                                         exclusion("E1", "N1", Mating::NonMates)});
  EXPECT_DOUBLE_EQ(*e.fpr, 0.0);
  EXPECT_DOUBLE_EQ(*e.fnr, 0.0);
  const auto none = error_rates(std::vector<ResponseRecord>{inconclusive("E1", "M1")});
  EXPECT_FALSE(none.fpr.has_value());
  EXPECT_FALSE(none.fnr.has_value());
}

TEST(Waic, IdenticalDrawsHaveNoPenalty) {
  Eigen::MatrixXd ll(5, 3);
  for (int s = 0; s < 5; ++s) ll.row(s) << -0.5, -1.25, -2.0;
  const auto w = waic(ll);
  EXPECT_DOUBLE_EQ(w.p_waic, 0.0);
  EXPECT_NEAR(w.waic, -2.0 * (-3.75), 1e-14);
}

TEST(Waic, TwoDrawHandExample) {
  Eigen::MatrixXd ll(2, 1);
  ll << std::log(0.4), std::log(0.6);
  const auto w = waic(ll);
  EXPECT_NEAR(w.lppd, std::log(0.5), 1e-15);
  const double d = std::log(0.4) - std::log(0.6);
  EXPECT_NEAR(w.p_waic, d * d / 2.0, 1e-15);  // sample variance of two values
  EXPECT_EQ(w.n_draws, 2u);
}

TEST(Waic, MatchesTwoPassOracleAndStreamingAccumulator) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> z(-1.0, 0.4);
  const int S = 300, n = 40;
  Eigen::MatrixXd ll(S, n);
  std::vector<std::vector<double>> rows(S, std::vector<double>(n));
  WaicAccumulator acc(n);
  for (int s = 0; s < S; ++s) {
    for (int k = 0; k < n; ++k) rows[s][k] = ll(s, k) = std::min(z(rng), 0.0);
    acc.add_draw(rows[s]);
  }
  const auto w = waic(ll);
  const auto o = oracle::waic(rows);
  EXPECT_NEAR(w.waic, o.waic, 1e-10);
  EXPECT_NEAR(w.lppd, o.lppd, 1e-10);
  EXPECT_NEAR(w.p_waic, o.p_waic, 1e-10);
  EXPECT_NEAR(w.se, o.se, 1e-10);
  const auto streamed = acc.result();
  EXPECT_NEAR(streamed.waic, w.waic, 1e-9);
  EXPECT_NEAR(streamed.p_waic, w.p_waic, 1e-9);
}

TEST(Waic, ReorderInvariantAndAdditive) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> z(-1.0, 0.3);
  Eigen::MatrixXd ll(50, 20);
  for (int s = 0; s < 50; ++s)
    for (int k = 0; k < 20; ++k) ll(s, k) = z(rng);
  const auto w = waic(ll);
  Eigen::MatrixXd rev = ll.rowwise().reverse();
  const auto r = waic(rev);
  EXPECT_EQ(w.waic, r.waic);
  EXPECT_EQ(w.lppd, r.lppd);
  const auto a = waic(ll.leftCols(8)), b = waic(ll.rightCols(12));
  EXPECT_NEAR(a.lppd + b.lppd, w.lppd, 1e-12);
  EXPECT_NEAR(a.p_waic + b.p_waic, w.p_waic, 1e-12);
}

TEST(Waic, RejectsDegenerateInput) {
  EXPECT_THROW(waic(Eigen::MatrixXd::Zero(1, 3)), DomainError);
  Eigen::MatrixXd bad = Eigen::MatrixXd::Zero(3, 2);
  bad(1, 1) = kNegInf;
  EXPECT_THROW(waic(bad), DomainError);
}

TEST(PredictionError, HandCounts) {
  const std::vector<int> obs{0, 1, 2, 1};
  EXPECT_DOUBLE_EQ(prediction_error(obs, obs), 0.0);
  EXPECT_DOUBLE_EQ(prediction_error(obs, std::vector<int>{0, 1, 2, 2}), 0.25);
  EXPECT_THROW(prediction_error(obs, std::vector<int>{0}), ShapeError);
}

TEST(PredictionError, NoiselessSelfPrediction) {
  // Parameters whose modal prediction reproduces every observed score.
  const auto m = testing::scored({2, 2, {1, 1, 0, 1}});
  const RaschPosterior model(m);
  DrawSet d(model.output_names(), 1, 2);
  for (std::size_t it = 0; it < 2; ++it) {
    d.at(0, it, d.index("theta[1]")) = 3.0;
    d.at(0, it, d.index("theta[2]")) = 0.0;
    d.at(0, it, d.index("b[1]")) = 1.0;
    d.at(0, it, d.index("b[2]")) = -1.0;
  }
  EXPECT_DOUBLE_EQ(prediction_error(model, d), 0.0);
  d.at(0, 0, d.index("theta[2]")) = d.at(0, 1, d.index("theta[2]")) = 5.0;
  EXPECT_DOUBLE_EQ(prediction_error(model, d), 0.25);
}

TEST(PredictiveScores, EvenOddsGiveOneHalf) {
  const auto m = testing::scored({2, 3, {1, 0, 1, -1, 0, 0}});
  DrawSet d({"theta[1]", "theta[2]", "b[1]", "b[2]", "b[3]"}, 1, 4);
  for (std::size_t it = 0; it < 4; ++it) {
    const double t = static_cast<double>(it);
    for (std::size_t p = 0; p < 5; ++p) d.at(0, it, p) = t;
  }
  const auto rows = posterior_predictive_scores(d, m);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_DOUBLE_EQ(rows[0].predicted, 0.5);
  EXPECT_NEAR(rows[0].observed, 2.0 / 3.0, 1e-15);
  EXPECT_EQ(rows[1].n_items, 2u);
  std::ostringstream out;
  write_predictive_scores_csv(rows, out);
  EXPECT_NE(out.str().find("E001"), std::string::npos);
}

TEST(PredictiveScores, SingleDrawSingleItem) {
  const auto m = testing::scored({1, 1, {1}});
  DrawSet d({"theta[1]", "b[1]"}, 1, 1);
  d.at(0, 0, 0) = 0.8;
  d.at(0, 0, 1) = -0.3;
  EXPECT_NEAR(posterior_predictive_scores(d, m)[0].predicted, oracle::sigmoid(1.1), 1e-15);
}

}  // namespace
}  // namespace fpirt

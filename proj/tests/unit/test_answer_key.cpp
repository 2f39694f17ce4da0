#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "fixtures.hpp"
#include "fpirt/answer_key.hpp"
#include "fpirt/errors.hpp"
#include "fpirt/math.hpp"

namespace fpirt {
namespace {

using C = Conclusiveness;

/// One item answered by `n0 + n1 + n2` examiners with the given category counts.
CategoricalData counts(int n0, int n1, int n2) {
  const std::size_t N = static_cast<std::size_t>(n0 + n1 + n2);
  oracle::Grid g{N, 1, {}};
  for (int k = 0; k < n0; ++k) g.cells.push_back(0);
  for (int k = 0; k < n1; ++k) g.cells.push_back(1);
  for (int k = 0; k < n2; ++k) g.cells.push_back(2);
  return testing::categorical(g, 3, {1});
}

TEST(ModalKey, TieResolvesToLessConclusiveAndIsFlagged) {
  const auto k = modal_key(counts(13, 3, 13));
  ASSERT_EQ(k.size(), 1u);
  EXPECT_EQ(k.entries[0], C::NoValue);
  EXPECT_TRUE(k.tie[0]);
  EXPECT_EQ(k.source, KeySource::Modal);
}

TEST(ModalKey, PublishedCountExamples) {
  const auto k = modal_key(counts(9, 4, 8));
  EXPECT_EQ(k.entries[0], C::NoValue);
  EXPECT_FALSE(k.tie[0]);
  EXPECT_EQ(modal_key(counts(0, 0, 1)).entries[0], C::Conclusive);
}

TEST(ModalKey, PermutationInvariant) {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> cat(0, 2);
  oracle::Grid g{12, 6, std::vector<int>(72)};
  for (auto& c : g.cells) c = cat(rng);
  auto d = testing::categorical(g, 3, {1, 0, 1, 0, 1, 0});
  const auto a = modal_key(d);
  std::shuffle(d.observations.begin(), d.observations.end(), rng);
  const auto b = modal_key(d);
  EXPECT_EQ(a.entries, b.entries);
  EXPECT_EQ(a.tie, b.tie);
}

TEST(ModalKey, RequiresConclusivenessScale) {
  EXPECT_THROW(modal_key(testing::categorical({1, 1, {4}}, 6, {1})), DataError);
}

TEST(ThresholdKey, Intervals) {
  const std::vector<std::string> ids{"a", "b", "c", "d", "e"};
  const std::vector<double> T{-2.0, 0.0, 2.0, -1.0, 1.0};
  const std::vector<double> gamma{-1.0, 1.0};
  const auto k = threshold_key(ids, T, gamma, KeySource::CLTRM);
  EXPECT_EQ(k.entries, (std::vector<C>{C::NoValue, C::Inconclusive, C::Conclusive, C::NoValue, C::Inconclusive}));
  EXPECT_EQ(k.tie, (std::vector<bool>{false, false, false, true, true}));
  EXPECT_THROW(threshold_key(ids, T, std::vector<double>{1.0, -1.0}, KeySource::LTRM), DomainError);
}

TEST(ThresholdKey, AffineInvariance) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> z(0.0, 2.0);
  std::vector<std::string> ids;
  std::vector<double> T;
  for (int j = 0; j < 200; ++j) {
    ids.push_back("I" + std::to_string(j));
    T.push_back(z(rng));
  }
  const std::vector<double> gamma{-0.6, 0.9};
  const auto base = threshold_key(ids, T, gamma, KeySource::ALTRM);
  for (auto [s, c] : {std::pair{2.0, 0.5}, std::pair{0.25, -3.0}, std::pair{7.5, 1.0}}) {
    std::vector<double> T2, g2;
    for (double t : T) T2.push_back(s * t + c);
    for (double g : gamma) g2.push_back(s * g + c);
    EXPECT_EQ(threshold_key(ids, T2, g2, KeySource::ALTRM).entries, base.entries);
  }
}

TEST(ThresholdKey, ReadsMediansFromDraws) {
  DrawSet d({"T[1]", "T[2]", "gamma[1]", "gamma[2]"}, 1, 3);
  const double rows[3][4] = {{-3, 0.1, -1, 1}, {-2, 0.2, -1.2, 1.1}, {-1.5, 5, -0.8, 0.9}};
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t p = 0; p < 4; ++p) d.at(0, i, p) = rows[i][p];
  const std::vector<std::string> ids{"x", "y"};
  const auto k = threshold_key(d, ids, KeySource::LTRM);
  EXPECT_EQ(k.entries, (std::vector<C>{C::NoValue, C::Inconclusive}));
}

TEST(IRTreeKey, UnbiasedExaminerProbabilities) {
  const auto tree = TreeSpec::answer_key();
  const std::vector<double> zero(3, 0.0);
  const auto leaves = leaf_probs(tree, zero, zero);
  EXPECT_DOUBLE_EQ(leaves[0], 0.5);
  EXPECT_DOUBLE_EQ(leaves[1], 0.25);
  EXPECT_DOUBLE_EQ(leaves[2], 0.125);
  EXPECT_DOUBLE_EQ(leaves[3], 0.125);
  const auto g = unbiased_group_probs(tree, zero);
  EXPECT_DOUBLE_EQ(g[2], 0.25);
  const std::vector<std::string> ids{"I1"};
  EXPECT_EQ(irtree_key(ids, zero, tree).entries[0], C::NoValue);
}

TEST(IRTreeKey, ArgmaxOfGroupedProbabilities) {
  const auto tree = TreeSpec::answer_key();
  const std::vector<std::string> ids{"nv", "inc", "id", "ex"};
  // Row-major [item x node]; theta = 0 so P(one-branch) = inv_logit(-b).
  const double nv90 = -std::log(9.0);  // inv_logit(-b) = 0.9
  const std::vector<double> b{nv90, 0.0,  0.0,   //
                              3.0,  -3.0, 0.0,   //
                              3.0,  3.0,  -3.0,  //
                              3.0,  3.0,  3.0};
  const auto k = irtree_key(ids, b, tree);
  EXPECT_EQ(k.entries, (std::vector<C>{C::NoValue, C::Inconclusive, C::Conclusive, C::Conclusive}));
  EXPECT_EQ(k.auxiliary, (std::vector<std::string>{"Match", "Match", "Match", "NonMatch"}));
  EXPECT_NEAR(unbiased_group_probs(tree, std::span(b).first(3))[0], 0.9, 1e-15);
}

AnswerKey key_of(KeySource s, std::vector<C> e) {
  AnswerKey k;
  k.source = s;
  for (std::size_t q = 0; q < e.size(); ++q) k.item_ids.push_back("I" + std::to_string(q));
  k.entries = std::move(e);
  k.tie.assign(k.entries.size(), false);
  return k;
}

TEST(Disagreement, IdenticalKeysGiveZeroMatrix) {
  const std::vector<C> e{C::NoValue, C::Conclusive, C::Inconclusive};
  const std::vector<AnswerKey> keys{key_of(KeySource::Modal, e), key_of(KeySource::LTRM, e),
                                    key_of(KeySource::IRTree, e)};
  const auto d = disagreement_matrix(keys);
  for (const auto& row : d.counts)
    for (int c : row) EXPECT_EQ(c, 0);
  EXPECT_TRUE(d.details.empty());
}

TEST(Disagreement, OneItemDifferenceAndInvariants) {
  const std::vector<AnswerKey> keys{key_of(KeySource::Modal, {C::NoValue, C::Conclusive, C::Inconclusive}),
                                    key_of(KeySource::LTRM, {C::NoValue, C::Conclusive, C::Conclusive}),
                                    key_of(KeySource::CLTRM, {C::Conclusive, C::Inconclusive, C::Conclusive})};
  const auto d = disagreement_matrix(keys);
  EXPECT_EQ(d.counts[0][1], 1);
  EXPECT_EQ(d.counts[0][2], 3);
  EXPECT_EQ(d.counts[1][2], 2);
  for (std::size_t a = 0; a < 3; ++a) {
    EXPECT_EQ(d.counts[a][a], 0);
    for (std::size_t b = 0; b < 3; ++b) EXPECT_EQ(d.counts[a][b], d.counts[b][a]);
  }
  EXPECT_EQ(d.sources, (std::vector<std::string>{"Modal", "LTRM", "C-LTRM"}));
  std::ostringstream m, detail;
  write_disagreement_matrix_csv(d, m);
  write_disagreement_detail_csv(d, detail);
  EXPECT_EQ(m.str().substr(0, m.str().find('\n')), "key,Modal,LTRM,C-LTRM");
  const auto rows = detail.str();
  EXPECT_EQ(std::count(rows.begin(), rows.end(), '\n'), 4);
}

TEST(Disagreement, AlignsItemOrderAndRejectsMismatchedItems) {
  auto a = key_of(KeySource::Modal, {C::NoValue, C::Conclusive});
  auto b = key_of(KeySource::ALTRM, {C::Conclusive, C::NoValue});
  std::swap(b.item_ids[0], b.item_ids[1]);
  const std::vector<AnswerKey> same{a, b};
  EXPECT_EQ(disagreement_matrix(same).counts[0][1], 0);
  b.item_ids[0] = "other";
  const std::vector<AnswerKey> diff{a, b};
  EXPECT_THROW(disagreement_matrix(diff), DataError);
}

TEST(KeyCsv, Columns) {
  auto k = key_of(KeySource::IRTree, {C::Inconclusive});
  k.auxiliary = {"Match"};
  k.tie = {true};
  std::ostringstream out;
  write_key_csv(k, out);
  EXPECT_EQ(out.str(), "item_id,category,source,tie_flag,auxiliary\nI0,Inconclusive,IRTree,true,Match\n");
}

}  // namespace
}  // namespace fpirt

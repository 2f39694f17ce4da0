#include <gtest/gtest.h>

#include <sstream>

#include "fixtures.hpp"
#include "fpirt/data.hpp"
#include "fpirt/errors.hpp"

namespace fpirt {
namespace {

using testing::exclusion;
using testing::inconclusive;
using testing::individualization;
using testing::no_value;

const char* kHeader =
    "Examiner_ID,Pair_ID,Mating,Latent_Value,Compare_Value,Inconclusive_Reason,Exclusion_Reason,Difficulty\n";

TEST(ParseTable, HeaderOnlyGivesNoRecordsAndNoIssues) {
  std::istringstream in(kHeader);
  const auto r = parse_table(in);
  EXPECT_TRUE(r.records.empty());
  EXPECT_TRUE(r.issues.empty());
  EXPECT_EQ(r.data_rows, 0u);
}

TEST(ParseTable, MissingColumnsAreListed) {
  std::istringstream in("Examiner_ID,Pair_ID,Mating\nE1,I1,Mates\n");
  try {
    parse_table(in);
    FAIL() << "expected a schema error";
  } catch (const SchemaError& e) {
    EXPECT_EQ(e.missing_columns().size(), 5u);
    EXPECT_NE(std::string(e.what()).find("compare_value"), std::string::npos);
  }
}

TEST(ParseTable, InconclusiveWithoutReasonIsQuarantinedAndParsingContinues) {
  std::istringstream in(std::string(kHeader) +
                        "E1,I1,Mates,VID,Inconclusive,,,C_Medium\n"
                        "E1,I2,NonMates,VID,Exclusion,,Minutiae,B_Easy\n");
  const auto r = parse_table(in);
  ASSERT_EQ(r.records.size(), 1u);
  EXPECT_EQ(r.records[0].item_id, "I2");
  ASSERT_EQ(r.quarantined(), 1u);
  EXPECT_EQ(r.issues[0].row, 2u);
  EXPECT_EQ(r.issues[0].field, "inconclusive_reason");
}

TEST(ParseTable, InvalidTokenReportsRowAndField) {
  std::istringstream in(std::string(kHeader) + "E1,I1,Mates,VID,Individualization,,,Z\n" +
                        "E1,I2,Sometimes,VID,Individualization,,,\n");
  const auto r = parse_table(in);
  EXPECT_TRUE(r.records.empty());
  ASSERT_EQ(r.issues.size(), 2u);
  EXPECT_EQ(r.issues[0].row, 2u);
  EXPECT_EQ(r.issues[0].field, "difficulty");
  EXPECT_EQ(r.issues[1].row, 3u);
  EXPECT_EQ(r.issues[1].field, "mating");
}

TEST(ParseTable, TabDelimitedAndRowOrderPreserved) {
  std::istringstream in(
      "examiner_id\titem_id\tmating\tlatent_value\tcompare_value\tinconclusive_reason\texclusion_reason\t"
      "difficulty\n"
      "B\tI2\tMates\tNV\t\t\t\t\n"
      "A\tI1\tNonMates\tVEO\tInconclusive\tNoOverlap\t\tD_Difficult\n");
  const auto r = parse_table(in, TableFormat::tab());
  ASSERT_EQ(r.records.size(), 2u);
  EXPECT_EQ(r.records[0].examiner_id, "B");
  EXPECT_EQ(r.records[1].inconclusive_reason, InconclusiveReason::NoOverlap);
  EXPECT_EQ(r.records[1].reported_difficulty, ReportedDifficulty::D_Difficult);
}

TEST(ParseTable, VeoIndividualizationIsKeptButFlagged) {
  std::istringstream in(std::string(kHeader) + "E1,I1,Mates,VEO,Individualization,,,\n");
  const auto r = parse_table(in);
  ASSERT_EQ(r.records.size(), 1u);
  ASSERT_EQ(r.issues.size(), 1u);
  EXPECT_EQ(r.issues[0].severity, Severity::Warning);
  EXPECT_EQ(r.quarantined(), 0u);
}

TEST(ParseTable, CustomHeaderNames) {
  TableFormat fmt;
  fmt.header_names[Field::ExaminerId] = {"who"};
  std::istringstream in(
      "who,item_id,mating,latent_value,compare_value,inconclusive_reason,exclusion_reason,difficulty\n"
      "E9,I1,Mates,VID,Individualization,,,\n");
  const auto r = parse_table(in, fmt);
  ASSERT_EQ(r.records.size(), 1u);
  EXPECT_EQ(r.records[0].examiner_id, "E9");
}

TEST(ParseTable, WriteTableRoundTrips) {
  const std::vector<ResponseRecord> recs{
      individualization("E1", "I1"), exclusion("E1", "I2"), inconclusive("E2", "I1", InconclusiveReason::Insufficient),
      no_value("E2", "I2", Mating::NonMates)};
  std::stringstream buf;
  write_table(buf, recs);
  const auto r = parse_table(buf);
  ASSERT_EQ(r.records.size(), recs.size());
  EXPECT_TRUE(r.issues.empty());
  for (std::size_t k = 0; k < recs.size(); ++k) {
    EXPECT_EQ(r.records[k].examiner_id, recs[k].examiner_id);
    EXPECT_EQ(r.records[k].mating, recs[k].mating);
    EXPECT_EQ(r.records[k].latent_value, recs[k].latent_value);
    EXPECT_EQ(r.records[k].compare_value, recs[k].compare_value);
    EXPECT_EQ(r.records[k].inconclusive_reason, recs[k].inconclusive_reason);
    EXPECT_EQ(r.records[k].exclusion_reason, recs[k].exclusion_reason);
  }
}

TEST(ParseTable, IssuesSerializeAsJsonLines) {
  std::ostringstream out;
  write_issues_jsonl(out, {Issue{3, "mating", "invalid token 'x'", Severity::Error}});
  EXPECT_EQ(out.str(), "{\"row\":3,\"field\":\"mating\",\"message\":\"invalid token 'x'\",\"severity\":\"error\"}\n");
}

TEST(ScoreRecord, McarExamples) {
  const auto s = ScoringScheme::InconclusiveMCAR;
  EXPECT_EQ(score_record(individualization("E", "I", Mating::Mates), s), 1);
  EXPECT_EQ(score_record(exclusion("E", "I", Mating::NonMates), s), 1);
  EXPECT_EQ(score_record(individualization("E", "I", Mating::NonMates), s), 0);
  EXPECT_EQ(score_record(exclusion("E", "I", Mating::Mates), s), 0);
  EXPECT_FALSE(score_record(inconclusive("E", "I", InconclusiveReason::Close, Mating::NonMates), s).has_value());
  EXPECT_FALSE(score_record(no_value("E", "I"), s).has_value());
}

TEST(ScoreRecord, AlternateSchemes) {
  const auto inc = inconclusive("E", "I", InconclusiveReason::Close, Mating::NonMates);
  EXPECT_EQ(score_record(inc, ScoringScheme::InconclusiveIncorrect), 0);
  EXPECT_EQ(score_record(inc, ScoringScheme::InconclusiveCorrect), 1);
  EXPECT_EQ(score_record(no_value("E", "I"), ScoringScheme::InconclusiveIncorrect), 0);
  EXPECT_EQ(score_record(no_value("E", "I"), ScoringScheme::InconclusiveCorrect), 1);
}

TEST(ScoreRecord, SchemeMonotone) {
  const std::vector<ResponseRecord> all{
      individualization("E", "I", Mating::Mates), individualization("E", "I", Mating::NonMates),
      exclusion("E", "I", Mating::Mates), exclusion("E", "I", Mating::NonMates), inconclusive("E", "I"),
      no_value("E", "I")};
  for (const auto& r : all) {
    if (score_record(r, ScoringScheme::InconclusiveIncorrect) == 1) {
      EXPECT_EQ(score_record(r, ScoringScheme::InconclusiveCorrect), 1);
    }
  }
}

TEST(Conclusiveness, Examples) {
  EXPECT_EQ(to_conclusiveness(no_value("E", "I")), Conclusiveness::NoValue);
  EXPECT_EQ(to_conclusiveness(inconclusive("E", "I", InconclusiveReason::Close)), Conclusiveness::Inconclusive);
  auto veo = exclusion("E", "I");
  veo.latent_value = LatentValue::VEO;
  EXPECT_EQ(to_conclusiveness(veo), Conclusiveness::Conclusive);
}

TEST(Conclusiveness, HasValueWithoutDecisionIsAnIntegrityError) {
  auto r = individualization("E", "I");
  r.compare_value = CompareValue::None;
  EXPECT_THROW(to_conclusiveness(r), DataError);
  EXPECT_THROW(to_sequential(r), DataError);
}

TEST(Sequential, ExamplesAndGroupingCommutes) {
  EXPECT_EQ(to_sequential(inconclusive("E", "I", InconclusiveReason::NoOverlap)), SequentialOutcome::NoOverlap);
  EXPECT_EQ(to_sequential(individualization("E", "I")), SequentialOutcome::Individualization);
  const std::vector<ResponseRecord> all{
      individualization("E", "I"), exclusion("E", "I"), inconclusive("E", "I", InconclusiveReason::Close),
      inconclusive("E", "I", InconclusiveReason::Insufficient), inconclusive("E", "I", InconclusiveReason::NoOverlap),
      no_value("E", "I")};
  for (const auto& r : all) {
    EXPECT_EQ(group(to_sequential(r)), to_conclusiveness(r));
    EXPECT_EQ(group(to_key_tree(r)), to_conclusiveness(r));
  }
}

TEST(BuildMatrix, McarDropsInconclusive) {
  const auto m = build_matrix({individualization("E1", "I1"), inconclusive("E1", "I2")},
                              ScoringScheme::InconclusiveMCAR);
  EXPECT_EQ(m.entries.size(), 1u);
  EXPECT_EQ(m.n_examiners(), 1u);
  EXPECT_EQ(m.n_items(), 1u);
}

TEST(BuildMatrix, EntryCountEqualsPresentScores) {
  const std::vector<ResponseRecord> recs{individualization("E2", "I1"), exclusion("E1", "I2"),
                                         inconclusive("E1", "I1"), no_value("E2", "I2", Mating::NonMates)};
  for (auto s : {ScoringScheme::InconclusiveMCAR, ScoringScheme::InconclusiveIncorrect,
                 ScoringScheme::InconclusiveCorrect}) {
    std::size_t present = 0;
    for (const auto& r : recs) present += score_record(r, s).has_value();
    EXPECT_EQ(build_matrix(recs, s).entries.size(), present);
  }
}

TEST(BuildMatrix, IndicesAreSortedById) {
  const auto m = build_matrix({individualization("zeta", "I9"), individualization("alpha", "I1")},
                              ScoringScheme::InconclusiveMCAR);
  EXPECT_EQ(m.examiners.id(0), "alpha");
  EXPECT_EQ(m.items.id(0), "I1");
  EXPECT_EQ(m.entries[0].examiner, 1u);
}

TEST(BuildMatrix, DuplicatePairIsNamed) {
  try {
    build_matrix({individualization("E1", "I1"), exclusion("E1", "I1", Mating::Mates)},
                 ScoringScheme::InconclusiveMCAR);
    FAIL() << "expected a duplicate error";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("E1"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("I1"), std::string::npos);
  }
}

TEST(JointData, DifficultyFollowsScoredRecords) {
  auto a = individualization("E1", "I1");
  a.reported_difficulty = ReportedDifficulty::B_Easy;
  auto b = inconclusive("E1", "I2");
  b.reported_difficulty = ReportedDifficulty::E_VeryDifficult;
  const auto mcar = build_joint_data({a, b}, ScoringScheme::InconclusiveMCAR);
  ASSERT_EQ(mcar.difficulty.size(), 1u);
  EXPECT_EQ(mcar.difficulty[0].x, 2);
  EXPECT_EQ(build_joint_data({a, b}, ScoringScheme::InconclusiveIncorrect).difficulty.size(), 2u);
}

TEST(CategoricalData, BuildersUseZeroBasedCodesAndMating) {
  const std::vector<ResponseRecord> recs{no_value("E1", "I1"), inconclusive("E1", "I2", InconclusiveReason::Close,
                                                                              Mating::NonMates),
                                         exclusion("E2", "I2")};
  const auto c = build_conclusiveness_data(recs);
  EXPECT_EQ(c.n_categories, 3);
  ASSERT_EQ(c.observations.size(), 3u);
  EXPECT_EQ(c.observations[0].category, 0);
  EXPECT_EQ(c.observations[1].category, 1);
  EXPECT_EQ(c.observations[2].category, 2);
  EXPECT_EQ(c.item_mates, (std::vector<int>{1, 0}));
  const auto s = build_sequential_data(recs);
  EXPECT_EQ(s.observations[1].category, static_cast<int>(SequentialOutcome::Close));
  EXPECT_EQ(build_key_tree_data(recs).observations[2].category, static_cast<int>(KeyTreeOutcome::Exclusion));
}

TEST(CategoricalData, InconsistentMatingIsRejected) {
  EXPECT_THROW(build_conclusiveness_data({individualization("E1", "I1", Mating::Mates),
                                          exclusion("E2", "I1", Mating::NonMates)}),
               DataError);
}

TEST(Counts, LeafTotalsMatchRecords) {
  const auto c = count_dataset({no_value("E1", "I1"), inconclusive("E1", "I2"), individualization("E2", "I1"),
                                exclusion("E2", "I2")});
  EXPECT_EQ(c.records, 4u);
  EXPECT_EQ(c.no_value + c.inconclusive + c.individualizations + c.exclusions, c.records);
  std::size_t leaves = 0;
  for (auto n : c.leaves) leaves += n;
  EXPECT_EQ(leaves, c.records);
}

}  // namespace
}  // namespace fpirt

#pragma once

// Examiner response records, table ingestion, and the scoring/categorisation
// schemes shared by every model.

#include <array>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace fpirt {

enum class Mating { Mates, NonMates };
enum class LatentValue { NV, VEO, VID };
enum class CompareValue { None, Exclusion, Inconclusive, Individualization };
enum class InconclusiveReason { None, Close, Insufficient, NoOverlap };
enum class ExclusionReason { None, Minutiae, Pattern };
enum class ReportedDifficulty { None, A_Obvious, B_Easy, C_Medium, D_Difficult, E_VeryDifficult };

std::string_view to_string(Mating v);
std::string_view to_string(LatentValue v);
std::string_view to_string(CompareValue v);
std::string_view to_string(InconclusiveReason v);
std::string_view to_string(ExclusionReason v);
std::string_view to_string(ReportedDifficulty v);

/// One examiner x item interaction.
struct ResponseRecord {
  std::string examiner_id;
  std::string item_id;
  Mating mating = Mating::Mates;
  LatentValue latent_value = LatentValue::VID;
  CompareValue compare_value = CompareValue::None;
  InconclusiveReason inconclusive_reason = InconclusiveReason::None;
  ExclusionReason exclusion_reason = ExclusionReason::None;
  ReportedDifficulty reported_difficulty = ReportedDifficulty::None;

  bool has_value() const { return latent_value != LatentValue::NV; }
};

enum class ScoringScheme { InconclusiveMCAR, InconclusiveIncorrect, InconclusiveCorrect };

std::string_view to_string(ScoringScheme s);
std::string_view describe(ScoringScheme s);
/// Accepts "mcar", "incorrect", "correct" and the enum spellings.
ScoringScheme parse_scoring_scheme(std::string_view token);

/// Ordered three-category scale NoValue < Inconclusive < Conclusive (0-based codes).
enum class Conclusiveness : int { NoValue = 0, Inconclusive = 1, Conclusive = 2 };
inline constexpr int kConclusivenessCategories = 3;
std::string_view to_string(Conclusiveness c);

/// Leaves of the five-node binary decision process tree.
enum class SequentialOutcome : int {
  NoValue = 0,
  Individualization = 1,
  Close = 2,
  Insufficient = 3,
  NoOverlap = 4,
  Exclusion = 5
};
inline constexpr int kSequentialOutcomes = 6;
std::string_view to_string(SequentialOutcome o);
Conclusiveness group(SequentialOutcome o);

/// Leaves of the three-node answer-key tree.
enum class KeyTreeOutcome : int { NoValue = 0, Inconclusive = 1, Individualization = 2, Exclusion = 3 };
inline constexpr int kKeyTreeOutcomes = 4;
std::string_view to_string(KeyTreeOutcome o);
Conclusiveness group(KeyTreeOutcome o);

// ---------------------------------------------------------------------------
// Ingestion

enum class Field {
  ExaminerId,
  ItemId,
  Mating,
  LatentValue,
  CompareValue,
  InconclusiveReason,
  ExclusionReason,
  Difficulty
};
inline constexpr int kFieldCount = 8;
std::string_view canonical_name(Field f);

struct TableFormat {
  char delimiter = ',';
  /// Accepted header spellings per field, matched case-insensitively.
  std::map<Field, std::vector<std::string>> header_names = default_header_names();

  static std::map<Field, std::vector<std::string>> default_header_names();
  static TableFormat comma() { return {}; }
  static TableFormat tab() {
    TableFormat f;
    f.delimiter = '\t';
    return f;
  }
};

enum class Severity { Error, Warning };

/// A row-level problem. Errors quarantine the row; warnings only flag it.
struct Issue {
  std::size_t row = 0;  ///< 1-based line number in the source (header is line 1)
  std::string field;
  std::string message;
  Severity severity = Severity::Error;
};

struct ParseResult {
  std::vector<ResponseRecord> records;  ///< rows that parsed and satisfy all invariants
  std::vector<std::size_t> record_rows;  ///< source line of each record
  std::vector<Issue> issues;
  std::size_t data_rows = 0;

  std::size_t quarantined() const;
};

/// Throws SchemaError when required columns are missing.
ParseResult parse_table(std::istream& source, const TableFormat& format = {});

/// Invariant check for a single record; empty when valid.
std::vector<Issue> validate(const ResponseRecord& r);

/// Writes records with canonical headers and tokens (readable by parse_table).
void write_table(std::ostream& out, const std::vector<ResponseRecord>& records, char delimiter = ',');

/// JSON lines, one {row, field, message, severity} object per issue.
void write_issues_jsonl(std::ostream& out, const std::vector<Issue>& issues);

// ---------------------------------------------------------------------------
// Scoring

std::optional<int> score_record(const ResponseRecord& r, ScoringScheme s);

/// Throws DataError when a has-value record carries no comparison decision.
Conclusiveness to_conclusiveness(const ResponseRecord& r);
SequentialOutcome to_sequential(const ResponseRecord& r);
KeyTreeOutcome to_key_tree(const ResponseRecord& r);

/// 1..5 for A..E, nullopt when not reported.
std::optional<int> difficulty_level(ReportedDifficulty d);

/// Dense, lexicographically sorted id <-> index mapping.
class IndexMap {
 public:
  IndexMap() = default;
  explicit IndexMap(std::vector<std::string> ids);

  std::size_t size() const { return ids_.size(); }
  const std::string& id(std::size_t index) const { return ids_.at(index); }
  std::optional<std::size_t> find(const std::string& id) const;
  std::size_t index(const std::string& id) const;
  const std::vector<std::string>& ids() const { return ids_; }

 private:
  std::vector<std::string> ids_;
  std::unordered_map<std::string, std::size_t> lookup_;
};

struct ScoredEntry {
  std::size_t examiner = 0;
  std::size_t item = 0;
  int y = 0;
};

struct ScoredMatrix {
  IndexMap examiners;
  IndexMap items;
  std::vector<ScoredEntry> entries;

  std::size_t n_examiners() const { return examiners.size(); }
  std::size_t n_items() const { return items.size(); }
};

/// Throws DataError naming the first duplicated (examiner, item) pair.
ScoredMatrix build_matrix(const std::vector<ResponseRecord>& records, ScoringScheme s);

struct DifficultyObservation {
  std::size_t examiner = 0;
  std::size_t item = 0;
  int x = 1;  ///< 1 (A-Obvious) .. 5 (E-Very Difficult)
};

struct JointData {
  ScoredMatrix scored;
  std::vector<DifficultyObservation> difficulty;
};

/// Difficulty reports are kept only for records that are scored under the scheme,
/// so inconclusive reports drop out under InconclusiveMCAR.
JointData build_joint_data(const std::vector<ResponseRecord>& records, ScoringScheme s);

struct CategoricalObservation {
  std::size_t examiner = 0;
  std::size_t item = 0;
  int category = 0;
};

/// Unscored categorical responses (conclusiveness scale or tree leaves), with the
/// per-item same-source indicator.
struct CategoricalData {
  IndexMap examiners;
  IndexMap items;
  int n_categories = 0;
  std::vector<std::string> category_names;
  std::vector<CategoricalObservation> observations;
  std::vector<int> item_mates;  ///< 1 = Mates

  std::size_t n_examiners() const { return examiners.size(); }
  std::size_t n_items() const { return items.size(); }
};

CategoricalData build_conclusiveness_data(const std::vector<ResponseRecord>& records);
CategoricalData build_sequential_data(const std::vector<ResponseRecord>& records);
CategoricalData build_key_tree_data(const std::vector<ResponseRecord>& records);

/// Count summary used by ingest reports.
struct DatasetCounts {
  std::size_t records = 0;
  std::size_t examiners = 0;
  std::size_t items = 0;
  std::size_t no_value = 0;
  std::size_t inconclusive = 0;
  std::size_t individualizations = 0;
  std::size_t exclusions = 0;
  std::array<std::size_t, kSequentialOutcomes> leaves{};
};
DatasetCounts count_dataset(const std::vector<ResponseRecord>& records);

}  // namespace fpirt

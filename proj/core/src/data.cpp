#include "fpirt/data.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <sstream>

#include "fpirt/csv.hpp"
#include "fpirt/errors.hpp"
#include "json.hpp"

namespace fpirt {

namespace {

std::string normalize_token(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
  }
  return out;
}

std::string lower_trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  std::string out(s.substr(b, e - b));
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

bool is_blank(const std::string& t) { return t.empty() || t == "na" || t == "none" || t == "null"; }

std::optional<Mating> parse_mating(const std::string& t) {
  if (t == "mates" || t == "mate" || t == "mated") return Mating::Mates;
  if (t == "nonmates" || t == "nonmate" || t == "nonmated") return Mating::NonMates;
  return std::nullopt;
}

std::optional<LatentValue> parse_latent(const std::string& t) {
  if (t == "nv" || t == "novalue") return LatentValue::NV;
  if (t == "veo") return LatentValue::VEO;
  if (t == "vid") return LatentValue::VID;
  return std::nullopt;
}

std::optional<CompareValue> parse_compare(const std::string& t) {
  if (is_blank(t)) return CompareValue::None;
  if (t == "exclusion" || t == "excl") return CompareValue::Exclusion;
  if (t == "inconclusive" || t == "inc") return CompareValue::Inconclusive;
  if (t == "individualization" || t == "individualisation" || t == "id" || t == "individ")
    return CompareValue::Individualization;
  return std::nullopt;
}

std::optional<InconclusiveReason> parse_inc_reason(const std::string& t) {
  if (is_blank(t)) return InconclusiveReason::None;
  if (t == "close") return InconclusiveReason::Close;
  if (t == "insufficient") return InconclusiveReason::Insufficient;
  if (t == "nooverlap") return InconclusiveReason::NoOverlap;
  return std::nullopt;
}

std::optional<ExclusionReason> parse_exc_reason(const std::string& t) {
  if (is_blank(t)) return ExclusionReason::None;
  if (t == "minutiae") return ExclusionReason::Minutiae;
  if (t == "pattern") return ExclusionReason::Pattern;
  return std::nullopt;
}

std::optional<ReportedDifficulty> parse_difficulty(const std::string& t) {
  if (is_blank(t)) return ReportedDifficulty::None;
  if (t == "aobvious" || t == "a" || t == "obvious") return ReportedDifficulty::A_Obvious;
  if (t == "beasy" || t == "b" || t == "easy") return ReportedDifficulty::B_Easy;
  if (t == "cmedium" || t == "c" || t == "medium") return ReportedDifficulty::C_Medium;
  if (t == "ddifficult" || t == "d" || t == "difficult") return ReportedDifficulty::D_Difficult;
  if (t == "everydifficult" || t == "e" || t == "verydifficult")
    return ReportedDifficulty::E_VeryDifficult;
  return std::nullopt;
}

constexpr std::array<Field, kFieldCount> kAllFields = {
    Field::ExaminerId,   Field::ItemId,             Field::Mating,
    Field::LatentValue,  Field::CompareValue,       Field::InconclusiveReason,
    Field::ExclusionReason, Field::Difficulty};

std::string pair_name(const ResponseRecord& r) {
  return "(examiner " + r.examiner_id + ", item " + r.item_id + ")";
}

}  // namespace

std::string_view to_string(Mating v) { return v == Mating::Mates ? "Mates" : "NonMates"; }

std::string_view to_string(LatentValue v) {
  switch (v) {
    case LatentValue::NV: return "NV";
    case LatentValue::VEO: return "VEO";
    case LatentValue::VID: return "VID";
  }
  return "";
}

std::string_view to_string(CompareValue v) {
  switch (v) {
    case CompareValue::None: return "";
    case CompareValue::Exclusion: return "Exclusion";
    case CompareValue::Inconclusive: return "Inconclusive";
    case CompareValue::Individualization: return "Individualization";
  }
  return "";
}

std::string_view to_string(InconclusiveReason v) {
  switch (v) {
    case InconclusiveReason::None: return "";
    case InconclusiveReason::Close: return "Close";
    case InconclusiveReason::Insufficient: return "Insufficient";
    case InconclusiveReason::NoOverlap: return "NoOverlap";
  }
  return "";
}

std::string_view to_string(ExclusionReason v) {
  switch (v) {
    case ExclusionReason::None: return "";
    case ExclusionReason::Minutiae: return "Minutiae";
    case ExclusionReason::Pattern: return "Pattern";
  }
  return "";
}

std::string_view to_string(ReportedDifficulty v) {
  switch (v) {
    case ReportedDifficulty::None: return "";
    case ReportedDifficulty::A_Obvious: return "A_Obvious";
    case ReportedDifficulty::B_Easy: return "B_Easy";
    case ReportedDifficulty::C_Medium: return "C_Medium";
    case ReportedDifficulty::D_Difficult: return "D_Difficult";
    case ReportedDifficulty::E_VeryDifficult: return "E_VeryDifficult";
  }
  return "";
}

std::string_view to_string(ScoringScheme s) {
  switch (s) {
    case ScoringScheme::InconclusiveMCAR: return "InconclusiveMCAR";
    case ScoringScheme::InconclusiveIncorrect: return "InconclusiveIncorrect";
    case ScoringScheme::InconclusiveCorrect: return "InconclusiveCorrect";
  }
  return "";
}

std::string_view describe(ScoringScheme s) {
  switch (s) {
    case ScoringScheme::InconclusiveMCAR:
      return "true individualizations/exclusions score 1, false ones 0; inconclusive and "
             "no-value responses are treated as missing";
    case ScoringScheme::InconclusiveIncorrect:
      return "inconclusive and no-value responses score 0";
    case ScoringScheme::InconclusiveCorrect:
      return "inconclusive and no-value responses score 1";
  }
  return "";
}

ScoringScheme parse_scoring_scheme(std::string_view token) {
  const std::string t = normalize_token(token);
  if (t == "mcar" || t == "inconclusivemcar") return ScoringScheme::InconclusiveMCAR;
  if (t == "incorrect" || t == "inconclusiveincorrect") return ScoringScheme::InconclusiveIncorrect;
  if (t == "correct" || t == "inconclusivecorrect") return ScoringScheme::InconclusiveCorrect;
  throw DataError("unknown scoring scheme '" + std::string(token) + "'");
}

std::string_view to_string(Conclusiveness c) {
  switch (c) {
    case Conclusiveness::NoValue: return "NoValue";
    case Conclusiveness::Inconclusive: return "Inconclusive";
    case Conclusiveness::Conclusive: return "Conclusive";
  }
  return "";
}

std::string_view to_string(SequentialOutcome o) {
  switch (o) {
    case SequentialOutcome::NoValue: return "NoValue";
    case SequentialOutcome::Individualization: return "Individualization";
    case SequentialOutcome::Close: return "Close";
    case SequentialOutcome::Insufficient: return "Insufficient";
    case SequentialOutcome::NoOverlap: return "NoOverlap";
    case SequentialOutcome::Exclusion: return "Exclusion";
  }
  return "";
}

Conclusiveness group(SequentialOutcome o) {
  switch (o) {
    case SequentialOutcome::NoValue: return Conclusiveness::NoValue;
    case SequentialOutcome::Individualization:
    case SequentialOutcome::Exclusion: return Conclusiveness::Conclusive;
    default: return Conclusiveness::Inconclusive;
  }
}

std::string_view to_string(KeyTreeOutcome o) {
  switch (o) {
    case KeyTreeOutcome::NoValue: return "NoValue";
    case KeyTreeOutcome::Inconclusive: return "Inconclusive";
    case KeyTreeOutcome::Individualization: return "Individualization";
    case KeyTreeOutcome::Exclusion: return "Exclusion";
  }
  return "";
}

Conclusiveness group(KeyTreeOutcome o) {
  switch (o) {
    case KeyTreeOutcome::NoValue: return Conclusiveness::NoValue;
    case KeyTreeOutcome::Inconclusive: return Conclusiveness::Inconclusive;
    default: return Conclusiveness::Conclusive;
  }
}

std::string_view canonical_name(Field f) {
  switch (f) {
    case Field::ExaminerId: return "examiner_id";
    case Field::ItemId: return "item_id";
    case Field::Mating: return "mating";
    case Field::LatentValue: return "latent_value";
    case Field::CompareValue: return "compare_value";
    case Field::InconclusiveReason: return "inconclusive_reason";
    case Field::ExclusionReason: return "exclusion_reason";
    case Field::Difficulty: return "difficulty";
  }
  return "";
}

std::map<Field, std::vector<std::string>> TableFormat::default_header_names() {
  return {
      {Field::ExaminerId, {"examiner_id", "examiner", "examinerid"}},
      {Field::ItemId, {"item_id", "pair_id", "item", "pairid", "itemid"}},
      {Field::Mating, {"mating"}},
      {Field::LatentValue, {"latent_value", "latentvalue"}},
      {Field::CompareValue, {"compare_value", "comparevalue"}},
      {Field::InconclusiveReason, {"inconclusive_reason", "inconclusivereason"}},
      {Field::ExclusionReason, {"exclusion_reason", "exclusionreason"}},
      {Field::Difficulty, {"difficulty", "reported_difficulty"}},
  };
}

std::size_t ParseResult::quarantined() const {
  std::set<std::size_t> rows;
  for (const auto& issue : issues) {
    if (issue.severity == Severity::Error) rows.insert(issue.row);
  }
  return rows.size();
}

std::vector<Issue> validate(const ResponseRecord& r) {
  std::vector<Issue> out;
  auto fail = [&](std::string field, std::string msg) {
    out.push_back(Issue{0, std::move(field), std::move(msg), Severity::Error});
  };
  const bool inconclusive = r.compare_value == CompareValue::Inconclusive;
  const bool has_reason = r.inconclusive_reason != InconclusiveReason::None;
  if (inconclusive && !has_reason) {
    fail("inconclusive_reason", "inconclusive decision without an inconclusive reason");
  } else if (!inconclusive && has_reason) {
    fail("inconclusive_reason", "inconclusive reason given for a non-inconclusive decision");
  }
  const bool no_compare = r.compare_value == CompareValue::None;
  const bool nv = r.latent_value == LatentValue::NV;
  if (nv && !no_compare) {
    fail("compare_value", "comparison decision recorded for a no-value latent");
  } else if (!nv && no_compare) {
    fail("compare_value", "has-value latent without a comparison decision");
  }
  if (r.exclusion_reason != ExclusionReason::None && r.compare_value != CompareValue::Exclusion) {
    fail("exclusion_reason", "exclusion reason given for a non-exclusion decision");
  }
  if (r.latent_value == LatentValue::VEO && r.compare_value == CompareValue::Individualization) {
    out.push_back(Issue{0, "latent_value",
                        "value-for-exclusion-only latent followed by an individualization "
                        "(scored by compare_value)",
                        Severity::Warning});
  }
  return out;
}

ParseResult parse_table(std::istream& source, const TableFormat& format) {
  CsvReader reader(source, format.delimiter);
  ParseResult result;

  auto header = reader.next();
  if (!header) {
    std::vector<std::string> missing;
    for (Field f : kAllFields) missing.emplace_back(canonical_name(f));
    throw SchemaError("input has no header row", missing);
  }

  std::array<std::optional<std::size_t>, kFieldCount> column{};
  for (std::size_t c = 0; c < header->size(); ++c) {
    const std::string h = lower_trim((*header)[c]);
    for (Field f : kAllFields) {
      const auto it = format.header_names.find(f);
      if (it == format.header_names.end()) continue;
      for (const auto& name : it->second) {
        if (lower_trim(name) == h && !column[static_cast<int>(f)]) {
          column[static_cast<int>(f)] = c;
        }
      }
    }
  }
  std::vector<std::string> missing;
  for (Field f : kAllFields) {
    if (!column[static_cast<int>(f)]) missing.emplace_back(canonical_name(f));
  }
  if (!missing.empty()) {
    std::string msg = "missing required column(s):";
    for (const auto& m : missing) msg += " " + m;
    throw SchemaError(msg, missing);
  }

  while (auto row = reader.next()) {
    ++result.data_rows;
    const std::size_t line = reader.line();
    auto cell = [&](Field f) -> std::string {
      const std::size_t c = *column[static_cast<int>(f)];
      return c < row->size() ? (*row)[c] : std::string{};
    };
    bool ok = true;
    auto bad = [&](Field f, const std::string& raw) {
      result.issues.push_back(Issue{line, std::string(canonical_name(f)),
                                    "invalid token '" + raw + "'", Severity::Error});
      ok = false;
    };

    ResponseRecord r;
    // Ids are trimmed but otherwise kept verbatim.
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t");
      const auto e = s.find_last_not_of(" \t");
      return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
    };
    r.examiner_id = trim(cell(Field::ExaminerId));
    r.item_id = trim(cell(Field::ItemId));
    if (r.examiner_id.empty()) {
      result.issues.push_back(Issue{line, "examiner_id", "empty id", Severity::Error});
      ok = false;
    }
    if (r.item_id.empty()) {
      result.issues.push_back(Issue{line, "item_id", "empty id", Severity::Error});
      ok = false;
    }

    const std::string mating = cell(Field::Mating);
    if (auto v = parse_mating(normalize_token(mating))) r.mating = *v; else bad(Field::Mating, mating);
    const std::string latent = cell(Field::LatentValue);
    if (auto v = parse_latent(normalize_token(latent))) r.latent_value = *v; else bad(Field::LatentValue, latent);
    const std::string compare = cell(Field::CompareValue);
    if (auto v = parse_compare(normalize_token(compare))) r.compare_value = *v; else bad(Field::CompareValue, compare);
    const std::string inc = cell(Field::InconclusiveReason);
    if (auto v = parse_inc_reason(normalize_token(inc))) r.inconclusive_reason = *v;
    else bad(Field::InconclusiveReason, inc);
    const std::string exc = cell(Field::ExclusionReason);
    if (auto v = parse_exc_reason(normalize_token(exc))) r.exclusion_reason = *v;
    else bad(Field::ExclusionReason, exc);
    const std::string diff = cell(Field::Difficulty);
    if (auto v = parse_difficulty(normalize_token(diff))) r.reported_difficulty = *v;
    else bad(Field::Difficulty, diff);

    if (!ok) continue;
    for (auto& issue : validate(r)) {
      issue.row = line;
      if (issue.severity == Severity::Error) ok = false;
      result.issues.push_back(std::move(issue));
    }
    if (!ok) continue;
    result.records.push_back(std::move(r));
    result.record_rows.push_back(line);
  }
  return result;
}

void write_table(std::ostream& out, const std::vector<ResponseRecord>& records, char delimiter) {
  CsvWriter w(out, delimiter);
  std::vector<std::string> header;
  for (Field f : kAllFields) header.emplace_back(canonical_name(f));
  w.row(header);
  for (const auto& r : records) {
    w.row({r.examiner_id, r.item_id, std::string(to_string(r.mating)),
           std::string(to_string(r.latent_value)), std::string(to_string(r.compare_value)),
           std::string(to_string(r.inconclusive_reason)), std::string(to_string(r.exclusion_reason)),
           std::string(to_string(r.reported_difficulty))});
  }
}

void write_issues_jsonl(std::ostream& out, const std::vector<Issue>& issues) {
  for (const auto& issue : issues) {
    nlohmann::ordered_json j;
    j["row"] = issue.row;
    j["field"] = issue.field;
    j["message"] = issue.message;
    j["severity"] = issue.severity == Severity::Error ? "error" : "warning";
    out << j.dump() << '\n';
  }
}

std::optional<int> score_record(const ResponseRecord& r, ScoringScheme s) {
  const bool conclusive = r.compare_value == CompareValue::Individualization ||
                          r.compare_value == CompareValue::Exclusion;
  if (r.has_value() && conclusive) {
    const bool says_mates = r.compare_value == CompareValue::Individualization;
    return says_mates == (r.mating == Mating::Mates) ? 1 : 0;
  }
  switch (s) {
    case ScoringScheme::InconclusiveMCAR: return std::nullopt;
    case ScoringScheme::InconclusiveIncorrect: return 0;
    case ScoringScheme::InconclusiveCorrect: return 1;
  }
  return std::nullopt;
}

Conclusiveness to_conclusiveness(const ResponseRecord& r) {
  if (!r.has_value()) return Conclusiveness::NoValue;
  switch (r.compare_value) {
    case CompareValue::Inconclusive: return Conclusiveness::Inconclusive;
    case CompareValue::Individualization:
    case CompareValue::Exclusion: return Conclusiveness::Conclusive;
    case CompareValue::None: break;
  }
  throw DataError("record " + pair_name(r) + " has value but no comparison decision");
}

SequentialOutcome to_sequential(const ResponseRecord& r) {
  if (!r.has_value()) return SequentialOutcome::NoValue;
  switch (r.compare_value) {
    case CompareValue::Individualization: return SequentialOutcome::Individualization;
    case CompareValue::Exclusion: return SequentialOutcome::Exclusion;
    case CompareValue::Inconclusive:
      switch (r.inconclusive_reason) {
        case InconclusiveReason::Close: return SequentialOutcome::Close;
        case InconclusiveReason::Insufficient: return SequentialOutcome::Insufficient;
        case InconclusiveReason::NoOverlap: return SequentialOutcome::NoOverlap;
        case InconclusiveReason::None:
          throw DataError("record " + pair_name(r) + " is inconclusive without a reason");
      }
      break;
    case CompareValue::None: break;
  }
  throw DataError("record " + pair_name(r) + " has value but no comparison decision");
}

KeyTreeOutcome to_key_tree(const ResponseRecord& r) {
  if (!r.has_value()) return KeyTreeOutcome::NoValue;
  switch (r.compare_value) {
    case CompareValue::Inconclusive: return KeyTreeOutcome::Inconclusive;
    case CompareValue::Individualization: return KeyTreeOutcome::Individualization;
    case CompareValue::Exclusion: return KeyTreeOutcome::Exclusion;
    case CompareValue::None: break;
  }
  throw DataError("record " + pair_name(r) + " has value but no comparison decision");
}

std::optional<int> difficulty_level(ReportedDifficulty d) {
  if (d == ReportedDifficulty::None) return std::nullopt;
  return static_cast<int>(d);
}

IndexMap::IndexMap(std::vector<std::string> ids) : ids_(std::move(ids)) {
  std::sort(ids_.begin(), ids_.end());
  ids_.erase(std::unique(ids_.begin(), ids_.end()), ids_.end());
  lookup_.reserve(ids_.size());
  for (std::size_t i = 0; i < ids_.size(); ++i) lookup_.emplace(ids_[i], i);
}

std::optional<std::size_t> IndexMap::find(const std::string& id) const {
  const auto it = lookup_.find(id);
  if (it == lookup_.end()) return std::nullopt;
  return it->second;
}

std::size_t IndexMap::index(const std::string& id) const {
  const auto it = lookup_.find(id);
  if (it == lookup_.end()) throw DataError("unknown id '" + id + "'");
  return it->second;
}

namespace {

void check_duplicates(const std::vector<ResponseRecord>& records) {
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& r : records) {
    if (!seen.emplace(r.examiner_id, r.item_id).second) {
      throw DataError("duplicate response for " + pair_name(r));
    }
  }
}

std::vector<int> item_mating(const std::vector<ResponseRecord>& records, const IndexMap& items) {
  std::vector<int> mates(items.size(), -1);
  for (const auto& r : records) {
    const auto j = items.find(r.item_id);
    if (!j) continue;
    const int m = r.mating == Mating::Mates ? 1 : 0;
    if (mates[*j] == -1) {
      mates[*j] = m;
    } else if (mates[*j] != m) {
      throw DataError("item " + r.item_id + " is recorded as both mates and non-mates");
    }
  }
  return mates;
}

template <typename Outcome>
CategoricalData build_categorical(const std::vector<ResponseRecord>& records, int n_categories,
                                  Outcome (*map)(const ResponseRecord&)) {
  check_duplicates(records);
  CategoricalData data;
  std::vector<std::string> e_ids, i_ids;
  e_ids.reserve(records.size());
  i_ids.reserve(records.size());
  for (const auto& r : records) {
    e_ids.push_back(r.examiner_id);
    i_ids.push_back(r.item_id);
  }
  data.examiners = IndexMap(std::move(e_ids));
  data.items = IndexMap(std::move(i_ids));
  data.n_categories = n_categories;
  for (int c = 0; c < n_categories; ++c) {
    data.category_names.emplace_back(to_string(static_cast<Outcome>(c)));
  }
  data.observations.reserve(records.size());
  for (const auto& r : records) {
    data.observations.push_back({data.examiners.index(r.examiner_id), data.items.index(r.item_id),
                                 static_cast<int>(map(r))});
  }
  data.item_mates = item_mating(records, data.items);
  return data;
}

}  // namespace

ScoredMatrix build_matrix(const std::vector<ResponseRecord>& records, ScoringScheme s) {
  check_duplicates(records);
  std::vector<std::string> e_ids, i_ids;
  for (const auto& r : records) {
    if (score_record(r, s)) {
      e_ids.push_back(r.examiner_id);
      i_ids.push_back(r.item_id);
    }
  }
  ScoredMatrix m;
  m.examiners = IndexMap(std::move(e_ids));
  m.items = IndexMap(std::move(i_ids));
  for (const auto& r : records) {
    if (const auto y = score_record(r, s)) {
      m.entries.push_back({m.examiners.index(r.examiner_id), m.items.index(r.item_id), *y});
    }
  }
  return m;
}

JointData build_joint_data(const std::vector<ResponseRecord>& records, ScoringScheme s) {
  JointData data;
  data.scored = build_matrix(records, s);
  for (const auto& r : records) {
    if (!score_record(r, s)) continue;
    if (const auto x = difficulty_level(r.reported_difficulty)) {
      data.difficulty.push_back({data.scored.examiners.index(r.examiner_id),
                                 data.scored.items.index(r.item_id), *x});
    }
  }
  return data;
}

CategoricalData build_conclusiveness_data(const std::vector<ResponseRecord>& records) {
  return build_categorical<Conclusiveness>(records, kConclusivenessCategories, &to_conclusiveness);
}

CategoricalData build_sequential_data(const std::vector<ResponseRecord>& records) {
  return build_categorical<SequentialOutcome>(records, kSequentialOutcomes, &to_sequential);
}

CategoricalData build_key_tree_data(const std::vector<ResponseRecord>& records) {
  return build_categorical<KeyTreeOutcome>(records, kKeyTreeOutcomes, &to_key_tree);
}

DatasetCounts count_dataset(const std::vector<ResponseRecord>& records) {
  DatasetCounts c;
  c.records = records.size();
  std::set<std::string> e, i;
  for (const auto& r : records) {
    e.insert(r.examiner_id);
    i.insert(r.item_id);
    if (!r.has_value()) ++c.no_value;
    switch (r.compare_value) {
      case CompareValue::Inconclusive: ++c.inconclusive; break;
      case CompareValue::Individualization: ++c.individualizations; break;
      case CompareValue::Exclusion: ++c.exclusions; break;
      case CompareValue::None: break;
    }
    try {
      ++c.leaves[static_cast<int>(to_sequential(r))];
    } catch (const DataError&) {
    }
  }
  c.examiners = e.size();
  c.items = i.size();
  return c;
}

}  // namespace fpirt

#pragma once

#include <cstdio>
#include <string>
#include <vector>

#include "fpirt/data.hpp"
#include "oracles.hpp"

namespace fpirt::testing {

inline ResponseRecord record(std::string examiner, std::string item, Mating m, LatentValue lv, CompareValue cv,
                             InconclusiveReason ir = InconclusiveReason::None,
                             ExclusionReason er = ExclusionReason::None,
                             ReportedDifficulty d = ReportedDifficulty::None) {
  ResponseRecord r;
  r.examiner_id = std::move(examiner);
  r.item_id = std::move(item);
  r.mating = m;
  r.latent_value = lv;
  r.compare_value = cv;
  r.inconclusive_reason = ir;
  r.exclusion_reason = er;
  r.reported_difficulty = d;
  return r;
}

inline ResponseRecord no_value(std::string e, std::string i, Mating m = Mating::Mates) {
  return record(std::move(e), std::move(i), m, LatentValue::NV, CompareValue::None);
}
inline ResponseRecord individualization(std::string e, std::string i, Mating m = Mating::Mates) {
  return record(std::move(e), std::move(i), m, LatentValue::VID, CompareValue::Individualization);
}
inline ResponseRecord exclusion(std::string e, std::string i, Mating m = Mating::NonMates) {
  return record(std::move(e), std::move(i), m, LatentValue::VID, CompareValue::Exclusion,
                InconclusiveReason::None, ExclusionReason::Minutiae);
}
inline ResponseRecord inconclusive(std::string e, std::string i, InconclusiveReason why = InconclusiveReason::Close,
                                   Mating m = Mating::Mates) {
  return record(std::move(e), std::move(i), m, LatentValue::VID, CompareValue::Inconclusive, why);
}

/// Zero-padded ids so lexicographic order equals numeric order.
inline std::vector<std::string> ids(const std::string& prefix, std::size_t n) {
  std::vector<std::string> v;
  char buf[32];
  for (std::size_t k = 0; k < n; ++k) {
    std::snprintf(buf, sizeof buf, "%03zu", k + 1);
    v.push_back(prefix + buf);
  }
  return v;
}

/// Scored matrix from a dense grid; -1 cells are skipped.
inline ScoredMatrix scored(const oracle::Grid& y) {
  ScoredMatrix m;
  m.examiners = IndexMap(ids("E", y.rows));
  m.items = IndexMap(ids("I", y.cols));
  for (std::size_t i = 0; i < y.rows; ++i)
    for (std::size_t j = 0; j < y.cols; ++j)
      if (y.at(i, j) >= 0) m.entries.push_back({i, j, y.at(i, j)});
  return m;
}

inline CategoricalData categorical(const oracle::Grid& y, int n_categories, std::vector<int> mates) {
  CategoricalData d;
  d.examiners = IndexMap(ids("E", y.rows));
  d.items = IndexMap(ids("I", y.cols));
  d.n_categories = n_categories;
  for (int c = 0; c < n_categories; ++c) d.category_names.push_back("c" + std::to_string(c));
  for (std::size_t i = 0; i < y.rows; ++i)
    for (std::size_t j = 0; j < y.cols; ++j)
      if (y.at(i, j) >= 0) d.observations.push_back({i, j, y.at(i, j)});
  d.item_mates = std::move(mates);
  return d;
}

}  // namespace fpirt::testing

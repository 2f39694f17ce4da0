#include "fpirt/answer_key.hpp"

#include <algorithm>
#include <array>
#include <numeric>

#include "fpirt/csv.hpp"
#include "fpirt/diagnostics.hpp"
#include "fpirt/errors.hpp"
#include "fpirt/math.hpp"
#include "fpirt/ordinal.hpp"

namespace fpirt {

std::string_view to_string(KeySource s) {
  switch (s) {
    case KeySource::Modal: return "Modal";
    case KeySource::LTRM: return "LTRM";
    case KeySource::CLTRM: return "C-LTRM";
    case KeySource::ALTRM: return "A-LTRM";
    case KeySource::IRTree: return "IRTree";
  }
  return "?";
}

namespace {

/// First maximum wins, so ties land on the lower (less conclusive) code.
std::pair<int, bool> argmax_low(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < v.size(); ++k) {
    if (v[k] > v[best]) best = k;
  }
  const bool tie = std::count(v.begin(), v.end(), v[best]) > 1;
  return {static_cast<int>(best), tie};
}

double point(const DrawSet& draws, std::string_view name, PointEstimate p) {
  const auto v = draws.pooled(draws.index(name));
  if (p == PointEstimate::Mean) return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  return quantile(v, 0.5);
}

}  // namespace

AnswerKey modal_key(const CategoricalData& data) {
  if (data.n_categories != kConclusivenessCategories) throw DataError("modal key needs the conclusiveness scale");
  std::vector<std::array<double, kConclusivenessCategories>> counts(data.n_items(), {0.0, 0.0, 0.0});
  for (const auto& o : data.observations) counts[o.item][static_cast<std::size_t>(o.category)] += 1.0;
  AnswerKey key;
  key.source = KeySource::Modal;
  key.item_ids = data.items.ids();
  for (const auto& c : counts) {
    if (c[0] + c[1] + c[2] == 0.0) throw DataError("every item needs at least one response");
    const auto [best, tie] = argmax_low(c);
    key.entries.push_back(static_cast<Conclusiveness>(best));
    key.tie.push_back(tie);
  }
  return key;
}

AnswerKey threshold_key(std::span<const std::string> item_ids, std::span<const double> T,
                        std::span<const double> gamma, KeySource source) {
  if (item_ids.size() != T.size()) throw ShapeError("one consensus location per item is required");
  if (gamma.size() != 2) throw ShapeError("expected two category boundaries");
  require_increasing(gamma);
  AnswerKey key;
  key.source = source;
  key.item_ids.assign(item_ids.begin(), item_ids.end());
  for (double t : T) {
    const auto c = t <= gamma[0]   ? Conclusiveness::NoValue
                   : t <= gamma[1] ? Conclusiveness::Inconclusive
                                   : Conclusiveness::Conclusive;
    key.entries.push_back(c);
    key.tie.push_back(t == gamma[0] || t == gamma[1]);
  }
  return key;
}

AnswerKey threshold_key(const DrawSet& draws, std::span<const std::string> item_ids, KeySource source,
                        PointEstimate p) {
  std::vector<double> T(item_ids.size());
  for (std::size_t j = 0; j < T.size(); ++j) T[j] = point(draws, "T[" + std::to_string(j + 1) + "]", p);
  const std::array<double, 2> gamma{point(draws, "gamma[1]", p), point(draws, "gamma[2]", p)};
  return threshold_key(item_ids, T, gamma, source);
}

std::vector<double> unbiased_group_probs(const TreeSpec& tree, std::span<const double> b) {
  const std::vector<double> theta(tree.n_nodes(), 0.0);
  return group_probs(tree, theta, b);
}

AnswerKey irtree_key(const DrawSet& draws, std::span<const std::string> item_ids, const TreeSpec& tree,
                     PointEstimate p) {
  const std::size_t K = tree.n_nodes();
  std::vector<double> b(item_ids.size() * K);
  for (std::size_t j = 0; j < item_ids.size(); ++j) {
    for (std::size_t k = 0; k < K; ++k) {
      b[j * K + k] = point(draws, "b[" + std::to_string(j + 1) + "," + std::to_string(k + 1) + "]", p);
    }
  }
  return irtree_key(item_ids, b, tree);
}

AnswerKey irtree_key(std::span<const std::string> item_ids, std::span<const double> b, const TreeSpec& tree) {
  const std::size_t K = tree.n_nodes();
  if (b.size() != item_ids.size() * K) throw ShapeError("item parameters must be [items x nodes]");
  // The source decision is the node whose `one` branch is an individualization leaf.
  std::optional<std::size_t> source_node;
  for (std::size_t k = 0; k < K; ++k) {
    const auto& n = tree.nodes()[k];
    if (n.one.leaf && n.zero.leaf && tree.leaf_name(n.one.index) == "Individualization") source_node = k;
  }
  AnswerKey key;
  key.source = KeySource::IRTree;
  key.item_ids.assign(item_ids.begin(), item_ids.end());
  for (std::size_t j = 0; j < item_ids.size(); ++j) {
    const auto row = b.subspan(j * K, K);
    const auto g = unbiased_group_probs(tree, row);
    const auto [best, tie] = argmax_low(g);
    key.entries.push_back(static_cast<Conclusiveness>(best));
    key.tie.push_back(tie);
    if (source_node) key.auxiliary.emplace_back(inv_logit(-row[*source_node]) >= 0.5 ? "Match" : "NonMatch");
  }
  return key;
}

Disagreement disagreement_matrix(std::span<const AnswerKey> keys) {
  Disagreement d;
  if (keys.empty()) return d;
  const std::size_t M = keys.size();
  // Align every key to the first key's item order.
  std::vector<std::string> ids = keys[0].item_ids;
  std::vector<std::vector<std::size_t>> order(M);
  for (std::size_t m = 0; m < M; ++m) {
    const auto& k = keys[m];
    if (k.entries.size() != k.item_ids.size()) throw ShapeError("answer key has mismatched columns");
    auto sorted_a = k.item_ids, sorted_b = ids;
    std::sort(sorted_a.begin(), sorted_a.end());
    std::sort(sorted_b.begin(), sorted_b.end());
    if (sorted_a != sorted_b || std::adjacent_find(sorted_a.begin(), sorted_a.end()) != sorted_a.end()) {
      throw DataError("answer keys " + std::string(to_string(keys[0].source)) + " and " +
                      std::string(to_string(k.source)) + " cover different items");
    }
    IndexMap local(k.item_ids);
    std::vector<std::size_t> pos(k.item_ids.size());
    for (std::size_t q = 0; q < k.item_ids.size(); ++q) pos[local.index(k.item_ids[q])] = q;
    for (const auto& id : ids) order[m].push_back(pos[local.index(id)]);
    d.sources.emplace_back(to_string(k.source));
  }
  d.counts.assign(M, std::vector<int>(M, 0));
  for (std::size_t q = 0; q < ids.size(); ++q) {
    DisagreementDetail row{ids[q], {}};
    for (std::size_t m = 0; m < M; ++m) row.categories.push_back(keys[m].entries[order[m][q]]);
    bool any = false;
    for (std::size_t m1 = 0; m1 < M; ++m1) {
      for (std::size_t m2 = m1 + 1; m2 < M; ++m2) {
        if (row.categories[m1] != row.categories[m2]) {
          ++d.counts[m1][m2];
          ++d.counts[m2][m1];
          any = true;
        }
      }
    }
    if (any) d.details.push_back(std::move(row));
  }
  return d;
}

void write_key_csv(const AnswerKey& key, std::ostream& out) {
  CsvWriter w(out);
  w.row({"item_id", "category", "source", "tie_flag", "auxiliary"});
  for (std::size_t q = 0; q < key.size(); ++q) {
    w.row({key.item_ids[q], std::string(to_string(key.entries[q])), std::string(to_string(key.source)),
           key.tie[q] ? "true" : "false", q < key.auxiliary.size() ? key.auxiliary[q] : ""});
  }
}

void write_disagreement_matrix_csv(const Disagreement& d, std::ostream& out) {
  CsvWriter w(out);
  std::vector<std::string> header{"key"};
  header.insert(header.end(), d.sources.begin(), d.sources.end());
  w.row(header);
  for (std::size_t m = 0; m < d.sources.size(); ++m) {
    std::vector<std::string> row{d.sources[m]};
    for (int c : d.counts[m]) row.push_back(std::to_string(c));
    w.row(row);
  }
}

void write_disagreement_detail_csv(const Disagreement& d, std::ostream& out) {
  CsvWriter w(out);
  std::vector<std::string> header{"item_id"};
  header.insert(header.end(), d.sources.begin(), d.sources.end());
  w.row(header);
  for (const auto& r : d.details) {
    std::vector<std::string> row{r.item_id};
    for (auto c : r.categories) row.emplace_back(to_string(c));
    w.row(row);
  }
}

}  // namespace fpirt

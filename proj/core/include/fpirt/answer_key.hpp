#pragma once

#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fpirt/data.hpp"
#include "fpirt/draws.hpp"
#include "fpirt/tree.hpp"

namespace fpirt {

enum class KeySource { Modal, LTRM, CLTRM, ALTRM, IRTree };
std::string_view to_string(KeySource s);

/// Posterior point summary used to turn draws into a key.
enum class PointEstimate { Median, Mean };

/// One conclusiveness category per item, in a fixed item order.
struct AnswerKey {
  KeySource source = KeySource::Modal;
  std::vector<std::string> item_ids;
  std::vector<Conclusiveness> entries;
  std::vector<bool> tie;  ///< modal ties, or a consensus location exactly on a boundary
  /// IRTree only: "Match" or "NonMatch" from the source-decision node.
  std::vector<std::string> auxiliary;

  std::size_t size() const { return item_ids.size(); }
};

/// Most frequent category per item; ties go to the less conclusive category and are flagged.
/// `data` must be on the conclusiveness scale.
AnswerKey modal_key(const CategoricalData& data);

/// NoValue when T <= gamma_1, Inconclusive when gamma_1 < T <= gamma_2, else Conclusive.
/// T exactly on a boundary is flagged. Throws DomainError unless gamma is increasing.
AnswerKey threshold_key(std::span<const std::string> item_ids, std::span<const double> T,
                        std::span<const double> gamma, KeySource source);

/// Reads "T[j]" and "gamma[1..2]" from consensus draws.
AnswerKey threshold_key(const DrawSet& draws, std::span<const std::string> item_ids, KeySource source,
                        PointEstimate point = PointEstimate::Median);

/// Category probabilities of an unbiased examiner (theta = 0 at every node) for
/// one item's node parameters, grouped to the conclusiveness scale.
std::vector<double> unbiased_group_probs(const TreeSpec& tree, std::span<const double> b);

/// Key from an answer-key tree fit: the most probable grouped category of an
/// unbiased examiner at point-estimate item parameters "b[j,k]".
AnswerKey irtree_key(const DrawSet& draws, std::span<const std::string> item_ids, const TreeSpec& tree,
                     PointEstimate point = PointEstimate::Median);
/// Same, from point estimates laid out row-major [J x K].
AnswerKey irtree_key(std::span<const std::string> item_ids, std::span<const double> b, const TreeSpec& tree);

struct DisagreementDetail {
  std::string item_id;
  std::vector<Conclusiveness> categories;  ///< one per key
};

struct Disagreement {
  std::vector<std::string> sources;
  std::vector<std::vector<int>> counts;  ///< symmetric, zero diagonal
  std::vector<DisagreementDetail> details;
};

/// Throws DataError when the keys do not cover the same items.
Disagreement disagreement_matrix(std::span<const AnswerKey> keys);

/// Columns: item_id, category, source, tie_flag, auxiliary.
void write_key_csv(const AnswerKey& key, std::ostream& out);
void write_disagreement_matrix_csv(const Disagreement& d, std::ostream& out);
void write_disagreement_detail_csv(const Disagreement& d, std::ostream& out);

}  // namespace fpirt

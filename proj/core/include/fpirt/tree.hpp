#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

namespace fpirt {

/// One branch target: another node or a leaf outcome code.
struct TreeChild {
  bool leaf = true;
  int index = 0;

  static TreeChild node(int i) { return {false, i}; }
  static TreeChild outcome(int code) { return {true, code}; }
};

/// Binary node. The `one` branch is taken when the node's latent response is 1,
/// with probability inv_logit(theta_k - b_k).
struct TreeNode {
  TreeChild one;
  TreeChild zero;
};

struct PathStep {
  int node = 0;
  int code = 0;  ///< 1 or 0
};

class TreeSpec {
 public:
  /// Validates a rooted binary tree at node 0 whose leaves are exactly the codes
  /// 0..leaf_names.size()-1, each reached once. `leaf_group` maps each leaf to a
  /// coarser category (empty = identity).
  TreeSpec(std::vector<TreeNode> nodes, std::vector<std::string> leaf_names, std::vector<int> leaf_group = {},
           int n_groups = 0);

  /// Five-node decision process tree over SequentialOutcome codes.
  static TreeSpec decision_process();
  /// Three-node answer-key tree over KeyTreeOutcome codes.
  static TreeSpec answer_key();

  std::size_t n_nodes() const { return nodes_.size(); }
  std::size_t n_leaves() const { return leaf_names_.size(); }
  std::size_t n_groups() const { return static_cast<std::size_t>(n_groups_); }
  const std::vector<TreeNode>& nodes() const { return nodes_; }
  const std::string& leaf_name(int leaf) const;
  int group_of(int leaf) const;

  /// Root-to-leaf path. Throws DomainError for an unknown outcome.
  const std::vector<PathStep>& path(int leaf) const;

 private:
  std::vector<TreeNode> nodes_;
  std::vector<std::string> leaf_names_;
  std::vector<int> leaf_group_;
  int n_groups_ = 0;
  std::vector<std::vector<PathStep>> paths_;
};

/// Sum over path nodes of log inv_logit(+-(theta_k - b_k)).
double leaf_logprob(const TreeSpec& tree, std::span<const double> theta, std::span<const double> b, int leaf);

/// Adds d/d(theta_k - b_k) of leaf_logprob into d_diff and returns the value.
double leaf_logprob_grad(const TreeSpec& tree, std::span<const double> theta, std::span<const double> b, int leaf,
                         std::span<double> d_diff);

std::vector<double> leaf_probs(const TreeSpec& tree, std::span<const double> theta, std::span<const double> b);

/// Probabilities of the grouped categories.
std::vector<double> group_probs(const TreeSpec& tree, std::span<const double> theta, std::span<const double> b);

}  // namespace fpirt

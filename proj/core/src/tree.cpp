#include "fpirt/tree.hpp"

#include <cmath>

#include "fpirt/data.hpp"
#include "fpirt/errors.hpp"
#include "fpirt/math.hpp"

namespace fpirt {

TreeSpec::TreeSpec(std::vector<TreeNode> nodes, std::vector<std::string> leaf_names, std::vector<int> leaf_group,
                   int n_groups)
    : nodes_(std::move(nodes)), leaf_names_(std::move(leaf_names)), leaf_group_(std::move(leaf_group)) {
  if (nodes_.empty()) throw DomainError("a tree needs at least one node");
  const int L = static_cast<int>(leaf_names_.size());
  if (leaf_group_.empty()) {
    for (int l = 0; l < L; ++l) leaf_group_.push_back(l);
    n_groups_ = L;
  } else {
    if (static_cast<int>(leaf_group_.size()) != L) throw DomainError("leaf grouping has the wrong length");
    n_groups_ = n_groups;
    for (int g : leaf_group_) {
      if (g < 0 || g >= n_groups_) throw DomainError("leaf group out of range");
    }
  }
  paths_.assign(leaf_names_.size(), {});
  std::vector<int> leaf_hits(leaf_names_.size(), 0);
  std::vector<int> node_hits(nodes_.size(), 0);
  std::vector<PathStep> stack;
  // Depth-first walk; a node reached twice means the structure is not a tree.
  const auto walk = [&](auto&& self, int n) -> void {
    if (n < 0 || n >= static_cast<int>(nodes_.size())) throw DomainError("tree references an unknown node");
    if (node_hits[static_cast<std::size_t>(n)]++ > 0) throw DomainError("tree node reached by two paths");
    for (int code : {1, 0}) {
      const TreeChild& c = code == 1 ? nodes_[static_cast<std::size_t>(n)].one : nodes_[static_cast<std::size_t>(n)].zero;
      stack.push_back({n, code});
      if (c.leaf) {
        if (c.index < 0 || c.index >= L) throw DomainError("tree references an unknown leaf");
        if (leaf_hits[static_cast<std::size_t>(c.index)]++ > 0) throw DomainError("tree leaf reached by two paths");
        paths_[static_cast<std::size_t>(c.index)] = stack;
      } else {
        self(self, c.index);
      }
      stack.pop_back();
    }
  };
  walk(walk, 0);
  for (int h : node_hits) {
    if (h == 0) throw DomainError("tree has an unreachable node");
  }
  for (int h : leaf_hits) {
    if (h == 0) throw DomainError("tree has an unreachable leaf");
  }
}

TreeSpec TreeSpec::decision_process() {
  using O = SequentialOutcome;
  const auto leaf = [](O o) { return TreeChild::outcome(static_cast<int>(o)); };
  std::vector<TreeNode> nodes{
      {leaf(O::NoValue), TreeChild::node(1)},
      {leaf(O::Insufficient), TreeChild::node(2)},
      {TreeChild::node(3), TreeChild::node(4)},
      {leaf(O::Individualization), leaf(O::Close)},
      {leaf(O::Exclusion), leaf(O::NoOverlap)},
  };
  std::vector<std::string> names;
  std::vector<int> groups;
  for (int k = 0; k < kSequentialOutcomes; ++k) {
    names.emplace_back(to_string(static_cast<O>(k)));
    groups.push_back(static_cast<int>(group(static_cast<O>(k))));
  }
  return TreeSpec(std::move(nodes), std::move(names), std::move(groups), kConclusivenessCategories);
}

TreeSpec TreeSpec::answer_key() {
  using O = KeyTreeOutcome;
  const auto leaf = [](O o) { return TreeChild::outcome(static_cast<int>(o)); };
  std::vector<TreeNode> nodes{
      {leaf(O::NoValue), TreeChild::node(1)},
      {leaf(O::Inconclusive), TreeChild::node(2)},
      {leaf(O::Individualization), leaf(O::Exclusion)},
  };
  std::vector<std::string> names;
  std::vector<int> groups;
  for (int k = 0; k < kKeyTreeOutcomes; ++k) {
    names.emplace_back(to_string(static_cast<O>(k)));
    groups.push_back(static_cast<int>(group(static_cast<O>(k))));
  }
  return TreeSpec(std::move(nodes), std::move(names), std::move(groups), kConclusivenessCategories);
}

const std::string& TreeSpec::leaf_name(int leaf) const {
  if (leaf < 0 || leaf >= static_cast<int>(leaf_names_.size())) throw DomainError("unknown tree outcome");
  return leaf_names_[static_cast<std::size_t>(leaf)];
}

int TreeSpec::group_of(int leaf) const {
  if (leaf < 0 || leaf >= static_cast<int>(leaf_group_.size())) throw DomainError("unknown tree outcome");
  return leaf_group_[static_cast<std::size_t>(leaf)];
}

const std::vector<PathStep>& TreeSpec::path(int leaf) const {
  if (leaf < 0 || leaf >= static_cast<int>(paths_.size())) {
    throw DomainError("outcome " + std::to_string(leaf) + " is not a leaf of this tree");
  }
  return paths_[static_cast<std::size_t>(leaf)];
}

namespace {

void check_rows(const TreeSpec& tree, std::span<const double> theta, std::span<const double> b) {
  if (theta.size() != tree.n_nodes() || b.size() != tree.n_nodes()) {
    throw ShapeError("tree parameters need one value per node");
  }
}

}  // namespace

double leaf_logprob(const TreeSpec& tree, std::span<const double> theta, std::span<const double> b, int leaf) {
  check_rows(tree, theta, b);
  double lp = 0.0;
  for (const auto& s : tree.path(leaf)) {
    const double x = theta[static_cast<std::size_t>(s.node)] - b[static_cast<std::size_t>(s.node)];
    lp += s.code == 1 ? log_inv_logit(x) : log1m_inv_logit(x);
  }
  return lp;
}

double leaf_logprob_grad(const TreeSpec& tree, std::span<const double> theta, std::span<const double> b, int leaf,
                         std::span<double> d_diff) {
  double lp = 0.0;
  for (const auto& s : tree.path(leaf)) {
    const auto k = static_cast<std::size_t>(s.node);
    const double x = theta[k] - b[k];
    if (s.code == 1) {
      lp += log_inv_logit(x);
      d_diff[k] += inv_logit(-x);
    } else {
      lp += log1m_inv_logit(x);
      d_diff[k] -= inv_logit(x);
    }
  }
  return lp;
}

std::vector<double> leaf_probs(const TreeSpec& tree, std::span<const double> theta, std::span<const double> b) {
  std::vector<double> p(tree.n_leaves());
  for (std::size_t l = 0; l < p.size(); ++l) p[l] = std::exp(leaf_logprob(tree, theta, b, static_cast<int>(l)));
  return p;
}

std::vector<double> group_probs(const TreeSpec& tree, std::span<const double> theta, std::span<const double> b) {
  const auto leaves = leaf_probs(tree, theta, b);
  std::vector<double> g(tree.n_groups(), 0.0);
  for (std::size_t l = 0; l < leaves.size(); ++l) g[static_cast<std::size_t>(tree.group_of(static_cast<int>(l)))] += leaves[l];
  return g;
}

}  // namespace fpirt

#pragma once

#include <utility>
#include <vector>

#include "relex/corpus.hpp"
#include "relex/tree.hpp"

namespace relex {

// Undirected shortest path between two tokens in a dependency tree. The
// node list runs from `a` up to the topmost node (the LCA) and down to `b`.
struct DepPath {
  std::vector<int> nodes;
  int lca_pos = 0;     // position of the LCA within `nodes`
  bool degenerate = false;  // a == b

  std::vector<int> left_arm() const {  // a ... lca inclusive
    return {nodes.begin(), nodes.begin() + lca_pos + 1};
  }
  std::vector<int> right_arm() const {  // lca ... b inclusive
    return {nodes.begin() + lca_pos, nodes.end()};
  }
};

// Binary merge topology over the path: each arm folds leaf by leaf toward
// the LCA, the two arm tops merge at the root. Topology nodes 0..L-1 are
// the leaves in path order; TreeNode::input of leaf i is i.
struct PathMergeTree {
  std::vector<int> leaf_tokens;  // token index per leaf, path order
  int lca_leaf = 0;
  int m1_leaf = 0;  // leaves carrying the mention head words
  int m2_leaf = 0;
  TreeSpec topology;
  std::vector<std::pair<int, int>> token_span;  // per node: [min,max] token index

  int n_leaves() const { return static_cast<int>(leaf_tokens.size()); }
  int n_internal() const {
    return static_cast<int>(topology.nodes.size()) - n_leaves();
  }
};

DepPath shortest_path(const std::vector<Token>& tokens, int a, int b);

PathMergeTree build_merge_tree(const DepPath& path);

}  // namespace relex

#include "relex/deppath.hpp"

#include <algorithm>
#include <stdexcept>
#include <unordered_map>

namespace relex {

DepPath shortest_path(const std::vector<Token>& tokens, int a, int b) {
  const int n = static_cast<int>(tokens.size());
  if (a < 0 || a >= n || b < 0 || b >= n)
    throw std::out_of_range("shortest_path endpoint out of range");

  DepPath path;
  if (a == b) {
    path.nodes = {a};
    path.lca_pos = 0;
    path.degenerate = true;
    return path;
  }

  std::unordered_map<int, int> depth_of;  // ancestors of a -> chain position
  for (int cur = a, d = 0; cur != -1; cur = tokens[cur].head, ++d) depth_of[cur] = d;

  // walk up from b until the chains meet
  std::vector<int> up_from_b;
  int lca = -1;
  for (int cur = b; cur != -1; cur = tokens[cur].head) {
    auto it = depth_of.find(cur);
    if (it != depth_of.end()) {
      lca = cur;
      break;
    }
    up_from_b.push_back(cur);
  }
  if (lca == -1) throw std::logic_error("tokens do not share a root");

  for (int cur = a; cur != lca; cur = tokens[cur].head) path.nodes.push_back(cur);
  path.lca_pos = static_cast<int>(path.nodes.size());
  path.nodes.push_back(lca);
  for (auto it = up_from_b.rbegin(); it != up_from_b.rend(); ++it) path.nodes.push_back(*it);
  return path;
}

PathMergeTree build_merge_tree(const DepPath& path) {
  if (path.nodes.empty()) throw std::invalid_argument("empty dependency path");

  PathMergeTree tree;
  tree.leaf_tokens = path.nodes;
  tree.lca_leaf = path.lca_pos;
  tree.m1_leaf = 0;
  tree.m2_leaf = static_cast<int>(path.nodes.size()) - 1;

  const int n_leaves = tree.n_leaves();
  for (int i = 0; i < n_leaves; ++i) {
    tree.topology.add_leaf(i);
    tree.token_span.emplace_back(path.nodes[i], path.nodes[i]);
  }

  auto merge = [&](int left, int right) {
    int node = tree.topology.add_internal(left, right);
    tree.token_span.emplace_back(
        std::min(tree.token_span[left].first, tree.token_span[right].first),
        std::max(tree.token_span[left].second, tree.token_span[right].second));
    return node;
  };

  if (n_leaves == 1) {
    tree.topology.root = 0;
    return tree;
  }

  // left arm folds from the first mention head up to and including the lca
  int left_top = 0;
  for (int i = 1; i <= tree.lca_leaf; ++i) left_top = merge(left_top, i);

  if (tree.lca_leaf == n_leaves - 1) {  // lca is the far endpoint
    tree.topology.root = left_top;
    return tree;
  }

  // right arm folds from the second mention head toward (excluding) the lca
  int right_top = n_leaves - 1;
  for (int i = n_leaves - 2; i > tree.lca_leaf; --i) right_top = merge(right_top, i);

  tree.topology.root = merge(left_top, right_top);
  return tree;
}

}  // namespace relex

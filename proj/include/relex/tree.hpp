#pragma once

#include <array>
#include <vector>

namespace relex {

// Node of a recursive-computation tree. Nodes are stored in topological
// order (children strictly before parents). `input` indexes an external
// list of input vectors; -1 means the node receives a zero input.
struct TreeNode {
  std::array<int, 2> children{-1, -1};
  int n_children = 0;
  int input = -1;
};

struct TreeSpec {
  std::vector<TreeNode> nodes;
  int root = -1;

  int add_leaf(int input_index) {
    TreeNode n;
    n.input = input_index;
    nodes.push_back(n);
    return static_cast<int>(nodes.size()) - 1;
  }
  int add_internal(int left, int right) {
    TreeNode n;
    n.children = {left, right};
    n.n_children = 2;
    nodes.push_back(n);
    return static_cast<int>(nodes.size()) - 1;
  }
};

}  // namespace relex

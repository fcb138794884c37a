#include <deque>
#include <random>

#include "doctest.h"
#include "relex/deppath.hpp"
#include "test_helpers.hpp"

using namespace relex;
using relex::testing::tok;

namespace {

// "Stanford" <- "Research" <- "led" -> "Company" -> "founded" -> "Page"
std::vector<Token> stanford_sentence() {
  return {tok(0, "Stanford", "NNP", 1), tok(1, "Research", "NNP", 2),
          tok(2, "led", "VBD", -1),     tok(3, "Company", "NNP", 2),
          tok(4, "founded", "VBD", 3),  tok(5, "Page", "NNP", 4)};
}

// independent oracle: BFS over the undirected tree
std::vector<int> bfs_path(const std::vector<Token>& tokens, int a, int b) {
  const int n = static_cast<int>(tokens.size());
  std::vector<std::vector<int>> adj(n);
  for (int i = 0; i < n; ++i) {
    if (tokens[i].head >= 0) {
      adj[i].push_back(tokens[i].head);
      adj[tokens[i].head].push_back(i);
    }
  }
  std::vector<int> parent(n, -2);
  std::deque<int> queue = {a};
  parent[a] = -1;
  while (!queue.empty()) {
    const int cur = queue.front();
    queue.pop_front();
    if (cur == b) break;
    for (int next : adj[cur]) {
      if (parent[next] == -2) {
        parent[next] = cur;
        queue.push_back(next);
      }
    }
  }
  std::vector<int> path;
  for (int cur = b; cur != -1; cur = parent[cur]) path.push_back(cur);
  std::reverse(path.begin(), path.end());
  return path;
}

std::vector<Token> random_tree(int n, std::mt19937_64& rng) {
  std::vector<Token> tokens;
  for (int i = 0; i < n; ++i) {
    const int head = i == 0 ? -1 : std::uniform_int_distribution<int>(0, i - 1)(rng);
    tokens.push_back(tok(i, "w" + std::to_string(i), "NN", head));
  }
  return tokens;
}

}  // namespace

TEST_CASE("shortest_path reproduces the Stanford example with its lca") {
  const auto tokens = stanford_sentence();
  const DepPath path = shortest_path(tokens, 0, 5);
  CHECK(path.nodes == std::vector<int>{0, 1, 2, 3, 4, 5});
  CHECK(path.nodes[path.lca_pos] == 2);
  CHECK_FALSE(path.degenerate);
  CHECK(path.left_arm() == std::vector<int>{0, 1, 2});
  CHECK(path.right_arm() == std::vector<int>{2, 3, 4, 5});
}

TEST_CASE("shortest_path of a node with itself is a flagged single node") {
  const auto tokens = stanford_sentence();
  const DepPath path = shortest_path(tokens, 3, 3);
  CHECK(path.nodes == std::vector<int>{3});
  CHECK(path.lca_pos == 0);
  CHECK(path.degenerate);
}

TEST_CASE("shortest_path on a chain tree ends at the root lca") {
  // 0 <- 1 <- 2 <- 3 with 3 as root
  std::vector<Token> chain = {tok(0, "a", "NN", 1), tok(1, "b", "NN", 2), tok(2, "c", "NN", 3),
                              tok(3, "d", "NN", -1)};
  const DepPath path = shortest_path(chain, 0, 3);
  CHECK(path.nodes == std::vector<int>{0, 1, 2, 3});
  CHECK(path.nodes[path.lca_pos] == 3);
}

TEST_CASE("shortest_path agrees with a BFS oracle on random trees") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = std::uniform_int_distribution<int>(2, 12)(rng);
    const auto tokens = random_tree(n, rng);
    const int a = std::uniform_int_distribution<int>(0, n - 1)(rng);
    const int b = std::uniform_int_distribution<int>(0, n - 1)(rng);
    const DepPath path = shortest_path(tokens, a, b);
    CHECK(path.nodes == bfs_path(tokens, a, b));

    // the lca is the unique path node whose parent is off the path
    int depth_min_node = path.nodes[path.lca_pos];
    for (int node : path.nodes) {
      int depth = 0;
      for (int cur = node; cur != -1; cur = tokens[cur].head) ++depth;
      int lca_depth = 0;
      for (int cur = depth_min_node; cur != -1; cur = tokens[cur].head) ++lca_depth;
      CHECK(lca_depth <= depth);
    }
  }
}

TEST_CASE("build_merge_tree folds the Stanford path arm by arm") {
  const auto tokens = stanford_sentence();
  const PathMergeTree tree = build_merge_tree(shortest_path(tokens, 0, 5));
  REQUIRE(tree.n_leaves() == 6);
  CHECK(tree.n_internal() == 5);
  CHECK(tree.lca_leaf == 2);
  CHECK(tree.m1_leaf == 0);
  CHECK(tree.m2_leaf == 5);

  const auto& nodes = tree.topology.nodes;
  REQUIRE(nodes.size() == 11);
  // left arm: (Stanford, Research), then with led
  CHECK(nodes[6].children == std::array<int, 2>{0, 1});
  CHECK(nodes[7].children == std::array<int, 2>{6, 2});
  // right arm: (Page, founded), then with Company
  CHECK(nodes[8].children == std::array<int, 2>{5, 4});
  CHECK(nodes[9].children == std::array<int, 2>{8, 3});
  // root merges the two arm tops
  CHECK(nodes[10].children == std::array<int, 2>{7, 9});
  CHECK(tree.topology.root == 10);
}

TEST_CASE("merge tree degenerate shapes") {
  DepPath single;
  single.nodes = {4};
  single.lca_pos = 0;
  const PathMergeTree one = build_merge_tree(single);
  CHECK(one.n_leaves() == 1);
  CHECK(one.n_internal() == 0);
  CHECK(one.topology.root == 0);

  DepPath two;
  two.nodes = {1, 2};
  two.lca_pos = 0;  // lca is an endpoint
  const PathMergeTree pair = build_merge_tree(two);
  CHECK(pair.n_leaves() == 2);
  CHECK(pair.n_internal() == 1);
  CHECK(pair.topology.nodes[2].children == std::array<int, 2>{0, 1});
}

TEST_CASE("merge tree node count and spans on random paths") {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 200; ++trial) {
    const int len = std::uniform_int_distribution<int>(2, 9)(rng);
    DepPath path;
    for (int i = 0; i < len; ++i) path.nodes.push_back(i * 3);  // arbitrary token ids
    path.lca_pos = std::uniform_int_distribution<int>(0, len - 1)(rng);
    const PathMergeTree tree = build_merge_tree(path);
    CHECK(tree.n_internal() == len - 1);
    // every non-root node has exactly one parent
    std::vector<int> parents(tree.topology.nodes.size(), 0);
    for (const auto& node : tree.topology.nodes)
      for (int k = 0; k < node.n_children; ++k) ++parents[node.children[k]];
    for (std::size_t n = 0; n < parents.size(); ++n)
      CHECK(parents[n] == (static_cast<int>(n) == tree.topology.root ? 0 : 1));
    // root span covers the whole path
    CHECK(tree.token_span[tree.topology.root].first == 0);
    CHECK(tree.token_span[tree.topology.root].second == (len - 1) * 3);
  }
}

TEST_CASE("merge tree topology mirrors when the endpoints swap") {
  std::mt19937_64 rng(29);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = std::uniform_int_distribution<int>(2, 10)(rng);
    const auto tokens = random_tree(n, rng);
    const int a = std::uniform_int_distribution<int>(0, n - 1)(rng);
    int b = std::uniform_int_distribution<int>(0, n - 1)(rng);
    if (a == b) b = (b + 1) % n;

    const PathMergeTree fwd = build_merge_tree(shortest_path(tokens, a, b));
    const PathMergeTree rev = build_merge_tree(shortest_path(tokens, b, a));
    REQUIRE(fwd.n_leaves() == rev.n_leaves());
    CHECK(fwd.n_internal() == rev.n_internal());
    // leaves appear in reversed order, arms exchange
    const int L = fwd.n_leaves();
    for (int i = 0; i < L; ++i) CHECK(fwd.leaf_tokens[i] == rev.leaf_tokens[L - 1 - i]);
    CHECK(fwd.lca_leaf == L - 1 - rev.lca_leaf);
  }
}

#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "relex/tree.hpp"

namespace relex {

struct Gate {
  Eigen::MatrixXd W;  // applied to the node input
  Eigen::MatrixXd U;  // applied to (summed) child hidden states
  Eigen::VectorXd b;
};

enum GateIndex { kGateInput = 0, kGateForget = 1, kGateOutput = 2, kGateCand = 3 };

// Shared weights of the chain / merge-tree LSTM cell. The same struct holds
// gradients and AdaGrad accumulators, which share the shapes.
struct LstmParams {
  int dim = 0;
  std::array<Gate, 4> gates;

  static LstmParams zeros(int dim);
  /// Uniform in [-1/sqrt(dim), 1/sqrt(dim)], forget bias offset +1.
  static LstmParams seeded_init(int dim, std::uint64_t seed);

  Eigen::VectorXd flatten() const;
  static LstmParams unflatten(const Eigen::VectorXd& theta, int dim);
  std::size_t parameter_count() const;

  LstmParams& operator+=(const LstmParams& other);
  LstmParams& operator*=(double s);
};

// Cached activations of one cell evaluation; enough to run the exact
// backward pass without re-evaluating the gates.
struct NodeState {
  Eigen::VectorXd x;
  Eigen::VectorXd h_children;            // sum of child hidden states
  Eigen::VectorXd i, o, u, c, h;
  std::vector<Eigen::VectorXd> f;        // one forget gate per child
};

struct TreeStates {
  std::vector<NodeState> nodes;
  Eigen::VectorXd root_h;
};

std::vector<NodeState> chain_forward(const LstmParams& p,
                                     const std::vector<Eigen::VectorXd>& xs);

/// Child-sum evaluation over an arbitrary binary tree; leaves behave like a
/// chain cell with a zero predecessor.
TreeStates tree_forward(const LstmParams& p, const TreeSpec& tree,
                        const std::vector<Eigen::VectorXd>& inputs);

struct TreeGradients {
  LstmParams params;                       // dL/d(theta)
  std::vector<Eigen::VectorXd> inputs;     // dL/dx per entry of `inputs`
};

/// Exact reverse-mode gradients. `node_grads` holds dL/dh injections, any
/// subset of nodes (root plus internal nodes for the word-prediction loss).
TreeGradients tree_backward(const LstmParams& p, const TreeSpec& tree,
                            const std::vector<NodeState>& states,
                            const std::vector<Eigen::VectorXd>& inputs,
                            const std::vector<std::pair<int, Eigen::VectorXd>>& node_grads);

/// Central-difference check of `analytic` against `loss` on a random
/// subsample of at least `min_coords` coordinates. Returns
/// max |g_a - g_n| / max(1e-8, |g_a| + |g_n|).
double gradient_check(const std::function<double(const Eigen::VectorXd&)>& loss,
                      const Eigen::VectorXd& theta, const Eigen::VectorXd& analytic,
                      double h, int min_coords, std::mt19937_64& rng);

/// Convenience overload over a whole LSTM parameter set.
double gradient_check(const std::function<double(const LstmParams&)>& loss,
                      const LstmParams& p, const LstmParams& analytic, double h,
                      int min_coords, std::mt19937_64& rng);

}  // namespace relex

#include "relex/gradcheck.hpp"

#include <Eigen/Core>
#include <random>

#include "relex/deppath.hpp"
#include "relex/net.hpp"
#include "relex/train.hpp"
#include "relex/util.hpp"

namespace relex {

namespace {

constexpr double kStep = 1e-5;
constexpr int kCoords = 200;

Eigen::VectorXd random_vec(int d, std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Eigen::VectorXd v(d);
  for (int i = 0; i < d; ++i) v[i] = u(rng);
  return v;
}

// A merge tree over a random path with <= max_leaves leaves.
PathMergeTree random_merge_tree(int n_leaves, std::mt19937_64& rng) {
  DepPath path;
  path.nodes.resize(n_leaves);
  for (int i = 0; i < n_leaves; ++i) path.nodes[i] = i;
  path.lca_pos = std::uniform_int_distribution<int>(0, n_leaves - 1)(rng);
  return build_merge_tree(path);
}

Eigen::VectorXd concat(const std::vector<Eigen::VectorXd>& parts) {
  Eigen::Index total = 0;
  for (const auto& p : parts) total += p.size();
  Eigen::VectorXd out(total);
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    out.segment(at, p.size()) = p;
    at += p.size();
  }
  return out;
}

std::vector<Eigen::VectorXd> split_like(const Eigen::VectorXd& flat,
                                        const std::vector<Eigen::VectorXd>& shapes) {
  std::vector<Eigen::VectorXd> out;
  Eigen::Index at = 0;
  for (const auto& s : shapes) {
    out.push_back(flat.segment(at, s.size()));
    at += s.size();
  }
  return out;
}

double check_chain(std::mt19937_64& rng) {
  const int d = std::uniform_int_distribution<int>(1, 8)(rng);
  const int steps = std::uniform_int_distribution<int>(1, 5)(rng);
  const LstmParams p = LstmParams::seeded_init(d, rng());

  TreeSpec chain;
  std::vector<Eigen::VectorXd> xs;
  std::vector<Eigen::VectorXd> probes;
  int prev = -1;
  for (int t = 0; t < steps; ++t) {
    xs.push_back(random_vec(d, rng));
    probes.push_back(random_vec(d, rng));
    TreeNode node;
    node.input = t;
    if (prev >= 0) {
      node.children[0] = prev;
      node.n_children = 1;
    }
    chain.nodes.push_back(node);
    prev = t;
  }
  chain.root = prev;

  auto loss = [&](const LstmParams& theta) {
    const TreeStates s = tree_forward(theta, chain, xs);
    double total = 0;
    for (int t = 0; t < steps; ++t) total += probes[t].dot(s.nodes[t].h);
    return total;
  };

  const TreeStates states = tree_forward(p, chain, xs);
  std::vector<std::pair<int, Eigen::VectorXd>> inject;
  for (int t = 0; t < steps; ++t) inject.emplace_back(t, probes[t]);
  const TreeGradients grads = tree_backward(p, chain, states.nodes, xs, inject);

  return gradient_check(std::function<double(const LstmParams&)>(loss), p, grads.params, kStep,
                        kCoords, rng);
}

double check_tree(std::mt19937_64& rng) {
  const int d = std::uniform_int_distribution<int>(1, 8)(rng);
  const int leaves = std::uniform_int_distribution<int>(1, 5)(rng);
  const LstmParams p = LstmParams::seeded_init(d, rng());
  const PathMergeTree tree = random_merge_tree(leaves, rng);

  std::vector<Eigen::VectorXd> inputs;
  for (int i = 0; i < leaves; ++i) inputs.push_back(random_vec(d, rng));
  // inject at the root and at every internal node
  std::vector<std::pair<int, Eigen::VectorXd>> inject;
  inject.emplace_back(tree.topology.root, random_vec(d, rng));
  for (int n = leaves; n < static_cast<int>(tree.topology.nodes.size()); ++n)
    if (n != tree.topology.root) inject.emplace_back(n, random_vec(d, rng));

  auto loss_of = [&](const LstmParams& theta, const std::vector<Eigen::VectorXd>& ins) {
    const TreeStates s = tree_forward(theta, tree.topology, ins);
    double total = 0;
    for (const auto& [node, probe] : inject) total += probe.dot(s.nodes[node].h);
    return total;
  };

  const TreeStates states = tree_forward(p, tree.topology, inputs);
  const TreeGradients grads = tree_backward(p, tree.topology, states.nodes, inputs, inject);

  auto param_loss = [&](const LstmParams& theta) { return loss_of(theta, inputs); };
  const double err_params = gradient_check(std::function<double(const LstmParams&)>(param_loss),
                                           p, grads.params, kStep, kCoords, rng);

  auto input_loss = [&](const Eigen::VectorXd& flat) {
    return loss_of(p, split_like(flat, inputs));
  };
  const double err_inputs =
      gradient_check(input_loss, concat(inputs), concat(grads.inputs), kStep, kCoords, rng);
  return std::max(err_params, err_inputs);
}

double check_entity_loss(std::mt19937_64& rng) {
  const int d = std::uniform_int_distribution<int>(1, 8)(rng);
  const int k = std::uniform_int_distribution<int>(1, 3)(rng);
  std::vector<Eigen::VectorXd> parts;
  parts.push_back(random_vec(d, rng));  // e_i
  parts.push_back(random_vec(d, rng));  // e_j
  parts.push_back(random_vec(d, rng));  // f
  for (int a = 0; a < 2 * k; ++a) parts.push_back(random_vec(d, rng));

  auto eval = [&](const std::vector<Eigen::VectorXd>& v) {
    const std::vector<Eigen::VectorXd> ni(v.begin() + 3, v.begin() + 3 + k);
    const std::vector<Eigen::VectorXd> nj(v.begin() + 3 + k, v.end());
    return entity_loss(v[0], v[1], v[2], ni, nj);
  };

  const EntityLoss el = eval(parts);
  std::vector<Eigen::VectorXd> analytic = {el.g_ei, el.g_ej, el.g_f};
  analytic.insert(analytic.end(), el.g_neg_i.begin(), el.g_neg_i.end());
  analytic.insert(analytic.end(), el.g_neg_j.begin(), el.g_neg_j.end());

  auto loss = [&](const Eigen::VectorXd& flat) { return eval(split_like(flat, parts)).objective; };
  return gradient_check(loss, concat(parts), concat(analytic), kStep, kCoords, rng);
}

double check_word_loss(std::mt19937_64& rng) {
  const int d = std::uniform_int_distribution<int>(1, 8)(rng);
  const int n_ctx = std::uniform_int_distribution<int>(1, 3)(rng);
  const int k = std::uniform_int_distribution<int>(1, 2)(rng);

  std::vector<Eigen::VectorXd> parts;
  parts.push_back(random_vec(d, rng));  // h
  for (int c = 0; c < n_ctx * (1 + k); ++c) parts.push_back(random_vec(d, rng));

  auto eval = [&](const std::vector<Eigen::VectorXd>& v) {
    std::vector<Eigen::VectorXd> ctx(v.begin() + 1, v.begin() + 1 + n_ctx);
    std::vector<std::vector<Eigen::VectorXd>> negs;
    auto at = v.begin() + 1 + n_ctx;
    for (int c = 0; c < n_ctx; ++c) {
      negs.emplace_back(at, at + k);
      at += k;
    }
    return word_loss(v[0], ctx, negs);
  };

  const WordLoss wl = eval(parts);
  std::vector<Eigen::VectorXd> analytic = {wl.g_h};
  analytic.insert(analytic.end(), wl.g_context.begin(), wl.g_context.end());
  for (const auto& per_ctx : wl.g_negatives)
    analytic.insert(analytic.end(), per_ctx.begin(), per_ctx.end());

  auto loss = [&](const Eigen::VectorXd& flat) { return eval(split_like(flat, parts)).objective; };
  return gradient_check(loss, concat(parts), concat(analytic), kStep, kCoords, rng);
}

double check_softmax(std::mt19937_64& rng) {
  const int n_labels = std::uniform_int_distribution<int>(2, 5)(rng);
  const int n_sparse = std::uniform_int_distribution<int>(1, 6)(rng);
  const int d = std::uniform_int_distribution<int>(1, 8)(rng);
  const int gold = std::uniform_int_distribution<int>(0, n_labels - 1)(rng);

  SparseVector sparse;
  sparse.dimension = n_sparse;
  for (int j = 0; j < n_sparse; ++j)
    if (std::uniform_int_distribution<int>(0, 1)(rng)) sparse.indices.push_back(j);

  ClassifierParams c = ClassifierParams::zeros(n_labels, n_sparse, d);
  for (Eigen::Index r = 0; r < c.W.rows(); ++r)
    c.W.row(r) = random_vec(n_sparse + d, rng).transpose();
  c.b = random_vec(n_labels, rng);
  const Eigen::VectorXd dense = random_vec(d, rng);

  const ClassifierGrads g = classifier_loss(c, sparse, dense, gold);

  // gradient of W: dlogits applied to active sparse columns plus the dense
  // block; flatten [W, b, dense] for the check
  Eigen::MatrixXd gW = Eigen::MatrixXd::Zero(c.W.rows(), c.W.cols());
  for (int j : sparse.indices) gW.col(j) = g.dlogits;
  gW.middleCols(n_sparse, d) = g.dlogits * dense.transpose();

  const Eigen::Index w_size = c.W.size();
  Eigen::VectorXd theta(w_size + n_labels + d);
  theta << Eigen::Map<const Eigen::VectorXd>(c.W.data(), w_size), c.b, dense;
  Eigen::VectorXd analytic(theta.size());
  analytic << Eigen::Map<const Eigen::VectorXd>(gW.data(), w_size), g.dlogits, g.g_dense;

  auto loss = [&](const Eigen::VectorXd& t) {
    ClassifierParams probe = c;
    Eigen::Map<Eigen::VectorXd>(probe.W.data(), w_size) = t.segment(0, w_size);
    probe.b = t.segment(w_size, n_labels);
    const Eigen::VectorXd probe_dense = t.segment(w_size + n_labels, d);
    return classifier_loss(probe, sparse, probe_dense, gold).loss;
  };
  return gradient_check(loss, theta, analytic, kStep, kCoords, rng);
}

}  // namespace

GradCheckSummary run_gradient_suite(int configs, std::uint64_t seed) {
  GradCheckSummary summary;
  struct Component {
    const char* name;
    double (*check)(std::mt19937_64&);
  };
  const Component components[] = {{"chain_lstm", check_chain},
                                  {"tree_lstm", check_tree},
                                  {"entity_loss", check_entity_loss},
                                  {"word_loss", check_word_loss},
                                  {"finetune_softmax", check_softmax}};
  for (const auto& comp : components) {
    GradCheckReport report;
    report.component = comp.name;
    report.configs = configs;
    for (int i = 0; i < configs; ++i) {
      std::mt19937_64 rng(mix64(seed, mix64(std::hash<std::string>{}(comp.name), i)));
      report.max_error = std::max(report.max_error, comp.check(rng));
    }
    summary.max_error = std::max(summary.max_error, report.max_error);
    summary.components.push_back(std::move(report));
  }
  return summary;
}

}  // namespace relex

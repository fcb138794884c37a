#include "relex/net.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "relex/util.hpp"

namespace relex {

namespace {

Eigen::VectorXd sigmoid_vec(const Eigen::VectorXd& z) {
  return z.unaryExpr([](double v) { return sigmoid(v); });
}

// Gates live in (0,1) and h in (-1,1) mathematically; saturated doubles can
// land exactly on the bounds, so the runtime check uses closed intervals.
void check_state(const NodeState& s) {
  assert((s.i.array() >= 0).all() && (s.i.array() <= 1).all());
  assert((s.o.array() >= 0).all() && (s.o.array() <= 1).all());
  assert((s.u.array() >= -1).all() && (s.u.array() <= 1).all());
  assert((s.h.array() >= -1).all() && (s.h.array() <= 1).all());
  assert(s.c.allFinite());
  (void)s;
}

// One cell: node input x, per-child hidden/memory pairs.
NodeState cell_forward(const LstmParams& p, const Eigen::VectorXd& x,
                       const std::vector<const NodeState*>& children) {
  NodeState s;
  s.x = x;
  s.h_children = Eigen::VectorXd::Zero(p.dim);
  for (const NodeState* ch : children) s.h_children += ch->h;

  const Gate& gi = p.gates[kGateInput];
  const Gate& gf = p.gates[kGateForget];
  const Gate& go = p.gates[kGateOutput];
  const Gate& gu = p.gates[kGateCand];

  s.i = sigmoid_vec(gi.W * x + gi.U * s.h_children + gi.b);
  s.o = sigmoid_vec(go.W * x + go.U * s.h_children + go.b);
  s.u = (gu.W * x + gu.U * s.h_children + gu.b).array().tanh();
  s.c = s.i.cwiseProduct(s.u);
  for (const NodeState* ch : children) {
    Eigen::VectorXd fk = sigmoid_vec(gf.W * x + gf.U * ch->h + gf.b);
    s.c += fk.cwiseProduct(ch->c);
    s.f.push_back(std::move(fk));
  }
  s.h = s.o.cwiseProduct(s.c.array().tanh().matrix());
  check_state(s);
  return s;
}

}  // namespace

LstmParams LstmParams::zeros(int dim) {
  LstmParams p;
  p.dim = dim;
  for (auto& g : p.gates) {
    g.W = Eigen::MatrixXd::Zero(dim, dim);
    g.U = Eigen::MatrixXd::Zero(dim, dim);
    g.b = Eigen::VectorXd::Zero(dim);
  }
  return p;
}

LstmParams LstmParams::seeded_init(int dim, std::uint64_t seed) {
  LstmParams p = zeros(dim);
  std::mt19937_64 rng(seed);
  const double r = 1.0 / std::sqrt(static_cast<double>(dim));
  std::uniform_real_distribution<double> u(-r, r);
  for (auto& g : p.gates) {
    for (int a = 0; a < dim; ++a) {
      for (int b = 0; b < dim; ++b) {
        g.W(a, b) = u(rng);
        g.U(a, b) = u(rng);
      }
      g.b[a] = u(rng);
    }
  }
  p.gates[kGateForget].b.array() += 1.0;  // keep early memory open
  return p;
}

Eigen::VectorXd LstmParams::flatten() const {
  Eigen::VectorXd theta(parameter_count());
  Eigen::Index at = 0;
  for (const auto& g : gates) {
    for (const Eigen::MatrixXd* m : {&g.W, &g.U}) {
      theta.segment(at, m->size()) = Eigen::Map<const Eigen::VectorXd>(m->data(), m->size());
      at += m->size();
    }
    theta.segment(at, g.b.size()) = g.b;
    at += g.b.size();
  }
  return theta;
}

LstmParams LstmParams::unflatten(const Eigen::VectorXd& theta, int dim) {
  LstmParams p = zeros(dim);
  Eigen::Index at = 0;
  for (auto& g : p.gates) {
    for (Eigen::MatrixXd* m : {&g.W, &g.U}) {
      Eigen::Map<Eigen::VectorXd>(m->data(), m->size()) = theta.segment(at, m->size());
      at += m->size();
    }
    g.b = theta.segment(at, dim);
    at += dim;
  }
  return p;
}

std::size_t LstmParams::parameter_count() const {
  return 4 * (2 * static_cast<std::size_t>(dim) * dim + dim);
}

LstmParams& LstmParams::operator+=(const LstmParams& other) {
  for (int g = 0; g < 4; ++g) {
    gates[g].W += other.gates[g].W;
    gates[g].U += other.gates[g].U;
    gates[g].b += other.gates[g].b;
  }
  return *this;
}

LstmParams& LstmParams::operator*=(double s) {
  for (auto& g : gates) {
    g.W *= s;
    g.U *= s;
    g.b *= s;
  }
  return *this;
}

std::vector<NodeState> chain_forward(const LstmParams& p,
                                     const std::vector<Eigen::VectorXd>& xs) {
  std::vector<NodeState> states;
  states.reserve(xs.size());
  for (const auto& x : xs) {
    if (x.size() != p.dim) throw std::invalid_argument("chain_forward: input dimension mismatch");
    std::vector<const NodeState*> children;
    if (!states.empty()) children.push_back(&states.back());
    states.push_back(cell_forward(p, x, children));
  }
  return states;
}

TreeStates tree_forward(const LstmParams& p, const TreeSpec& tree,
                        const std::vector<Eigen::VectorXd>& inputs) {
  TreeStates out;
  out.nodes.reserve(tree.nodes.size());
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(p.dim);
  for (std::size_t n = 0; n < tree.nodes.size(); ++n) {
    const TreeNode& node = tree.nodes[n];
    const Eigen::VectorXd* x = &zero;
    if (node.input >= 0) {
      if (node.input >= static_cast<int>(inputs.size()))
        throw std::invalid_argument("tree_forward: missing input for leaf " + std::to_string(n));
      x = &inputs[node.input];
      if (x->size() != p.dim)
        throw std::invalid_argument("tree_forward: input dimension mismatch at leaf " +
                                    std::to_string(n));
    }
    std::vector<const NodeState*> children;
    for (int k = 0; k < node.n_children; ++k) {
      const int ch = node.children[k];
      if (ch < 0 || ch >= static_cast<int>(n))
        throw std::invalid_argument("tree_forward: tree is not topologically ordered");
      children.push_back(&out.nodes[ch]);
    }
    out.nodes.push_back(cell_forward(p, *x, children));
  }
  if (tree.root < 0 || tree.root >= static_cast<int>(out.nodes.size()))
    throw std::invalid_argument("tree_forward: bad root");
  out.root_h = out.nodes[tree.root].h;
  return out;
}

TreeGradients tree_backward(const LstmParams& p, const TreeSpec& tree,
                            const std::vector<NodeState>& states,
                            const std::vector<Eigen::VectorXd>& inputs,
                            const std::vector<std::pair<int, Eigen::VectorXd>>& node_grads) {
  const int n_nodes = static_cast<int>(tree.nodes.size());
  if (static_cast<int>(states.size()) != n_nodes)
    throw std::invalid_argument("tree_backward: states do not match the tree");

  TreeGradients out;
  out.params = LstmParams::zeros(p.dim);
  out.inputs.assign(inputs.size(), Eigen::VectorXd::Zero(p.dim));

  std::vector<Eigen::VectorXd> gh(n_nodes, Eigen::VectorXd::Zero(p.dim));
  std::vector<Eigen::VectorXd> gc(n_nodes, Eigen::VectorXd::Zero(p.dim));
  for (const auto& [node, grad] : node_grads) {
    if (node < 0 || node >= n_nodes)
      throw std::invalid_argument("tree_backward: gradient for node " + std::to_string(node) +
                                  " outside the tree");
    gh[node] += grad;
  }

  Gate& gi = out.params.gates[kGateInput];
  Gate& gf = out.params.gates[kGateForget];
  Gate& go = out.params.gates[kGateOutput];
  Gate& gu = out.params.gates[kGateCand];

  for (int n = n_nodes - 1; n >= 0; --n) {
    const TreeNode& node = tree.nodes[n];
    const NodeState& s = states[n];

    const Eigen::ArrayXd tanh_c = s.c.array().tanh();
    const Eigen::ArrayXd do_ = gh[n].array() * tanh_c;
    const Eigen::ArrayXd gc_n = gc[n].array() + gh[n].array() * s.o.array() * (1.0 - tanh_c.square());

    const Eigen::ArrayXd di = gc_n * s.u.array();
    const Eigen::ArrayXd du = gc_n * s.i.array();

    const Eigen::VectorXd dzi = (di * s.i.array() * (1.0 - s.i.array())).matrix();
    const Eigen::VectorXd dzo = (do_ * s.o.array() * (1.0 - s.o.array())).matrix();
    const Eigen::VectorXd dzu = (du * (1.0 - s.u.array().square())).matrix();

    gi.W.noalias() += dzi * s.x.transpose();
    gi.U.noalias() += dzi * s.h_children.transpose();
    gi.b += dzi;
    go.W.noalias() += dzo * s.x.transpose();
    go.U.noalias() += dzo * s.h_children.transpose();
    go.b += dzo;
    gu.W.noalias() += dzu * s.x.transpose();
    gu.U.noalias() += dzu * s.h_children.transpose();
    gu.b += dzu;

    Eigen::VectorXd gx = p.gates[kGateInput].W.transpose() * dzi +
                         p.gates[kGateOutput].W.transpose() * dzo +
                         p.gates[kGateCand].W.transpose() * dzu;
    const Eigen::VectorXd gh_shared = p.gates[kGateInput].U.transpose() * dzi +
                                      p.gates[kGateOutput].U.transpose() * dzo +
                                      p.gates[kGateCand].U.transpose() * dzu;

    for (int k = 0; k < node.n_children; ++k) {
      const int ch = node.children[k];
      const NodeState& child = states[ch];
      const Eigen::ArrayXd& fk = s.f[k].array();
      const Eigen::ArrayXd dfk = gc_n * child.c.array();
      const Eigen::VectorXd dzf = (dfk * fk * (1.0 - fk)).matrix();

      gf.W.noalias() += dzf * s.x.transpose();
      gf.U.noalias() += dzf * child.h.transpose();
      gf.b += dzf;

      gx += p.gates[kGateForget].W.transpose() * dzf;
      gh[ch] += gh_shared + p.gates[kGateForget].U.transpose() * dzf;
      gc[ch] += (gc_n * fk).matrix();
    }
    if (node.input >= 0) out.inputs[node.input] += gx;
  }
  return out;
}

double gradient_check(const std::function<double(const Eigen::VectorXd&)>& loss,
                      const Eigen::VectorXd& theta, const Eigen::VectorXd& analytic,
                      double h, int min_coords, std::mt19937_64& rng) {
  if (h <= 0) throw std::invalid_argument("gradient_check: step must be positive");
  if (theta.size() != analytic.size())
    throw std::invalid_argument("gradient_check: gradient size mismatch");
  if (!std::isfinite(loss(theta)))
    throw std::invalid_argument("gradient_check: loss is not finite at theta");

  const Eigen::Index dim = theta.size();
  std::vector<Eigen::Index> coords(dim);
  std::iota(coords.begin(), coords.end(), 0);
  if (dim > min_coords) {
    std::shuffle(coords.begin(), coords.end(), rng);
    coords.resize(min_coords);
  }

  double worst = 0.0;
  Eigen::VectorXd probe = theta;
  for (const Eigen::Index c : coords) {
    const double orig = probe[c];
    probe[c] = orig + h;
    const double up = loss(probe);
    probe[c] = orig - h;
    const double down = loss(probe);
    probe[c] = orig;
    const double numeric = (up - down) / (2.0 * h);
    const double denom = std::max(1e-8, std::abs(analytic[c]) + std::abs(numeric));
    worst = std::max(worst, std::abs(analytic[c] - numeric) / denom);
  }
  return worst;
}

double gradient_check(const std::function<double(const LstmParams&)>& loss,
                      const LstmParams& p, const LstmParams& analytic, double h,
                      int min_coords, std::mt19937_64& rng) {
  const int dim = p.dim;
  auto wrapped = [&](const Eigen::VectorXd& theta) {
    return loss(LstmParams::unflatten(theta, dim));
  };
  return gradient_check(wrapped, p.flatten(), analytic.flatten(), h, min_coords, rng);
}

}  // namespace relex

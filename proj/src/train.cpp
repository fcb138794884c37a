#include "relex/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "json.hpp"
#include "relex/eval.hpp"
#include "relex/util.hpp"

namespace relex {

namespace {

constexpr double kAdaGradEps = 1e-8;

Eigen::ArrayXXd penalty_term(const Eigen::Ref<const Eigen::MatrixXd>& param, Reg reg) {
  if (reg == Reg::L1) return param.array().sign();
  return param.array();
}

}  // namespace

void adagrad_step(Eigen::Ref<Eigen::MatrixXd> param, const Eigen::MatrixXd& grad,
                  Eigen::Ref<Eigen::MatrixXd> state, double alpha, double lambda, Reg reg) {
  state.array() += grad.array().square();
  const Eigen::ArrayXXd rate = alpha / (state.array().sqrt() + kAdaGradEps);
  param.array() -= rate * (grad.array() + lambda * penalty_term(param, reg));
}

void adagrad_step(Eigen::Ref<Eigen::VectorXd> param, const Eigen::VectorXd& grad,
                  Eigen::Ref<Eigen::VectorXd> state, double alpha, double lambda, Reg reg) {
  state.array() += grad.array().square();
  const Eigen::ArrayXd rate = alpha / (state.array().sqrt() + kAdaGradEps);
  const Eigen::ArrayXd penalty =
      reg == Reg::L1 ? param.array().sign().eval() : param.array().eval();
  param.array() -= rate * (grad.array() + lambda * penalty);
}

void adagrad_step(LstmParams& param, const LstmParams& grad, LstmParams& state, double alpha,
                  double lambda, Reg reg) {
  for (int g = 0; g < 4; ++g) {
    adagrad_step(param.gates[g].W, grad.gates[g].W, state.gates[g].W, alpha, lambda, reg);
    adagrad_step(param.gates[g].U, grad.gates[g].U, state.gates[g].U, alpha, lambda, reg);
    adagrad_step(param.gates[g].b, grad.gates[g].b, state.gates[g].b, alpha, lambda, reg);
  }
}

double trilinear_score(const Eigen::VectorXd& e_i, const Eigen::VectorXd& f,
                       const Eigen::VectorXd& e_j) {
  if (e_i.size() != f.size() || e_j.size() != f.size())
    throw std::invalid_argument("trilinear_score: dimension mismatch");
  return e_i.cwiseProduct(f).dot(e_j);
}

EntityLoss entity_loss(const Eigen::VectorXd& e_i, const Eigen::VectorXd& e_j,
                       const Eigen::VectorXd& f, const std::vector<Eigen::VectorXd>& neg_i,
                       const std::vector<Eigen::VectorXd>& neg_j) {
  EntityLoss r;
  const double s_pos = trilinear_score(e_i, f, e_j);
  r.objective = log_sigmoid(s_pos);
  const double w_pos = sigmoid(-s_pos);
  r.g_ei = w_pos * f.cwiseProduct(e_j);
  r.g_ej = w_pos * f.cwiseProduct(e_i);
  r.g_f = w_pos * e_i.cwiseProduct(e_j);

  r.g_neg_i.reserve(neg_i.size());
  for (const auto& ne : neg_i) {
    const double s = trilinear_score(ne, f, e_j);
    r.objective += log_sigmoid(-s);
    const double w = -sigmoid(s);
    r.g_neg_i.push_back(w * f.cwiseProduct(e_j));
    r.g_ej += w * f.cwiseProduct(ne);
    r.g_f += w * ne.cwiseProduct(e_j);
  }
  r.g_neg_j.reserve(neg_j.size());
  for (const auto& ne : neg_j) {
    const double s = trilinear_score(e_i, f, ne);
    r.objective += log_sigmoid(-s);
    const double w = -sigmoid(s);
    r.g_neg_j.push_back(w * f.cwiseProduct(e_i));
    r.g_ei += w * f.cwiseProduct(ne);
    r.g_f += w * e_i.cwiseProduct(ne);
  }
  return r;
}

WordLoss word_loss(const Eigen::VectorXd& h, const std::vector<Eigen::VectorXd>& context,
                   const std::vector<std::vector<Eigen::VectorXd>>& negatives) {
  if (!negatives.empty() && negatives.size() != context.size())
    throw std::invalid_argument("word_loss: negatives do not pair with the context");
  WordLoss r;
  r.g_h = Eigen::VectorXd::Zero(h.size());
  static const std::vector<Eigen::VectorXd> kNoNegatives;
  for (std::size_t c = 0; c < context.size(); ++c) {
    const auto& negs = negatives.empty() ? kNoNegatives : negatives[c];
    const SkipgramPair pair = skipgram_pair(h, context[c], negs);
    r.objective += pair.objective;
    r.g_h += pair.g_target;
    r.g_context.push_back(pair.g_context);
    r.g_negatives.push_back(pair.g_negatives);
  }
  return r;
}

ClassifierParams ClassifierParams::zeros(int n_labels, int n_sparse, int dim) {
  ClassifierParams c;
  c.n_labels = n_labels;
  c.n_sparse = n_sparse;
  c.dim = dim;
  c.W = Eigen::MatrixXd::Zero(n_labels, n_sparse + dim);
  c.b = Eigen::VectorXd::Zero(n_labels);
  return c;
}

namespace {

Eigen::VectorXd logits_of(const ClassifierParams& c, const SparseVector& sparse,
                          const Eigen::VectorXd& dense) {
  Eigen::VectorXd logits = c.b;
  for (int j : sparse.indices) {
    if (j < 0 || j >= c.n_sparse)
      throw std::invalid_argument("classify: sparse index outside the dictionary");
    logits += c.W.col(j);
  }
  logits.noalias() += c.W.middleCols(c.n_sparse, c.dim) * dense;
  return logits;
}

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
  const double m = logits.maxCoeff();
  Eigen::VectorXd p = (logits.array() - m).exp();
  return p / p.sum();
}

}  // namespace

Classification classify(const ClassifierParams& c, const SparseVector& sparse,
                        const Eigen::VectorXd& dense) {
  Classification out;
  out.probabilities = softmax(logits_of(c, sparse, dense));
  int best = 0;
  for (int i = 1; i < out.probabilities.size(); ++i)
    if (out.probabilities[i] > out.probabilities[best]) best = i;
  out.label = best;
  return out;
}

ClassifierGrads classifier_loss(const ClassifierParams& c, const SparseVector& sparse,
                                const Eigen::VectorXd& dense, int gold) {
  if (gold < 0 || gold >= c.n_labels) throw std::invalid_argument("classifier_loss: bad gold label");
  ClassifierGrads g;
  const Eigen::VectorXd probs = softmax(logits_of(c, sparse, dense));
  g.loss = -std::log(std::max(probs[gold], 1e-300));
  g.dlogits = probs;
  g.dlogits[gold] -= 1.0;
  g.g_dense = c.W.middleCols(c.n_sparse, c.dim).transpose() * g.dlogits;
  return g;
}

bool EarlyStopper::observe(double metric) {
  ++epoch_;
  improved_ = false;
  if (epoch_ == 1 || metric > best_) {
    best_ = metric;
    best_epoch_ = epoch_;
    bad_ = 0;
    improved_ = true;
    return false;
  }
  if (metric == best_) {
    bad_ = 0;
    return false;
  }
  ++bad_;
  return bad_ >= patience_;
}

namespace {

// Leaves bound to embedding-table rows; -1 rows fall back to deterministic
// out-of-vocabulary vectors.
struct AssembledTree {
  PathMergeTree tree;
  std::vector<Eigen::VectorXd> inputs;
  std::vector<int> entity_rows;  // per leaf
  std::vector<int> word_rows;    // per leaf
};

AssembledTree assemble_tree(const Instance& inst, const EmbeddingTable& words,
                            const EmbeddingTable& entities) {
  AssembledTree a;
  a.tree = build_merge_tree(shortest_path(inst.tokens, inst.m1.head_word, inst.m2.head_word));
  const int n = a.tree.n_leaves();
  a.entity_rows.assign(n, -1);
  a.word_rows.assign(n, -1);
  a.inputs.reserve(n);
  const int dim = words.dim;
  for (int leaf = 0; leaf < n; ++leaf) {
    if (leaf == a.tree.m1_leaf || leaf == a.tree.m2_leaf) {
      const Mention& m = leaf == a.tree.m1_leaf ? inst.m1 : inst.m2;
      const int row = entities.find(m.entity_id);
      a.entity_rows[leaf] = row;
      a.inputs.push_back(row >= 0 ? entities.vectors.row(row).transpose().eval()
                                  : fallback_vector(m.entity_id, dim));
    } else {
      const std::string& surface = inst.tokens[a.tree.leaf_tokens[leaf]].surface;
      const int row = words.find(surface);
      a.word_rows[leaf] = row;
      a.inputs.push_back(row >= 0 ? words.vectors.row(row).transpose().eval()
                                  : fallback_vector(surface, dim));
    }
  }
  return a;
}

void adagrad_row(EmbeddingTable& table, Eigen::MatrixXd& state, int row,
                 const Eigen::VectorXd& grad, double alpha, double lambda, Reg reg) {
  Eigen::VectorXd p = table.vectors.row(row).transpose();
  Eigen::VectorXd g = state.row(row).transpose();
  adagrad_step(p, grad, g, alpha, lambda, reg);
  table.vectors.row(row) = p.transpose();
  state.row(row) = g.transpose();
}

std::vector<Eigen::VectorXd> rows_of(const EmbeddingTable& table, const std::vector<int>& rows) {
  std::vector<Eigen::VectorXd> out;
  out.reserve(rows.size());
  for (int r : rows) out.push_back(table.vectors.row(r).transpose());
  return out;
}

}  // namespace

PretrainResult pretrain(const Dataset& train, const TrainConfig& cfg,
                        const EmbeddingTable& words, const EmbeddingTable& entities,
                        const LstmParams& lstm_init) {
  if (words.dim != lstm_init.dim || entities.dim != lstm_init.dim)
    throw std::invalid_argument("pretrain: table and LSTM dimensions disagree");

  PretrainResult result;
  Checkpoint& ck = result.checkpoint;
  ck.dim = lstm_init.dim;
  ck.config = cfg;
  ck.lstm = lstm_init;
  ck.words = words;
  ck.entities = entities;
  ck.label_vocab = train.label_vocab;

  LstmParams lstm_state = LstmParams::zeros(ck.dim);
  Eigen::MatrixXd entity_state = Eigen::MatrixXd::Zero(ck.entities.vectors.rows(), ck.dim);
  Eigen::MatrixXd word_state = Eigen::MatrixXd::Zero(ck.words.vectors.rows(), ck.dim);

  std::optional<UnigramSampler> entity_sampler;
  if (ck.entities.size() > 0)
    entity_sampler.emplace(std::vector<double>(ck.entities.size(), 1.0), 1.0);
  if (!entity_sampler && !train.instances.empty())
    throw std::invalid_argument("pretrain: the entity table is empty");

  std::optional<UnigramSampler> word_sampler;
  if (cfg.use_word_loss) {
    std::vector<double> counts(ck.words.size(), 0.0);
    for (const auto& inst : train.instances)
      for (const auto& t : inst.tokens) {
        const int row = ck.words.find(t.surface);
        if (row >= 0) counts[row] += 1;
      }
    if (std::accumulate(counts.begin(), counts.end(), 0.0) > 0)
      word_sampler.emplace(counts, 0.75);
    else if (!train.instances.empty())
      std::cerr << "warning: word loss enabled but no corpus token is in the word table\n";
  }

  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double objective_sum = 0;

    for (std::size_t idx : order) {
      const Instance& inst = train.instances[idx];
      const AssembledTree a = assemble_tree(inst, ck.words, ck.entities);
      const TreeStates states = tree_forward(ck.lstm, a.tree.topology, a.inputs);

      const int ei_row = ck.entities.find(inst.m1.entity_id);
      const int ej_row = ck.entities.find(inst.m2.entity_id);
      const Eigen::VectorXd ei = ei_row >= 0 ? ck.entities.vectors.row(ei_row).transpose().eval()
                                             : fallback_vector(inst.m1.entity_id, ck.dim);
      const Eigen::VectorXd ej = ej_row >= 0 ? ck.entities.vectors.row(ej_row).transpose().eval()
                                             : fallback_vector(inst.m2.entity_id, ck.dim);

      const std::vector<int> neg_i_rows = negative_sample(*entity_sampler, cfg.k, ei_row, rng);
      const std::vector<int> neg_j_rows = negative_sample(*entity_sampler, cfg.k, ej_row, rng);
      const EntityLoss el = entity_loss(ei, ej, states.root_h, rows_of(ck.entities, neg_i_rows),
                                        rows_of(ck.entities, neg_j_rows));
      objective_sum += el.objective;

      // losses are log likelihoods; the trainer descends on their negation
      std::vector<std::pair<int, Eigen::VectorXd>> node_grads;
      node_grads.emplace_back(a.tree.topology.root, -el.g_f);

      struct NodeWordLoss {
        std::vector<int> context_rows;
        std::vector<std::vector<int>> negative_rows;
        WordLoss loss;
      };
      std::vector<NodeWordLoss> word_losses;
      if (cfg.use_word_loss && word_sampler) {
        const int n_tokens = static_cast<int>(inst.tokens.size());
        for (int node = a.tree.n_leaves(); node < static_cast<int>(a.tree.topology.nodes.size());
             ++node) {
          const auto [lo, hi] = a.tree.token_span[node];
          NodeWordLoss nw;
          for (int t = lo - cfg.context_window; t < lo; ++t)
            if (t >= 0 && ck.words.find(inst.tokens[t].surface) >= 0)
              nw.context_rows.push_back(ck.words.find(inst.tokens[t].surface));
          for (int t = hi + 1; t <= hi + cfg.context_window; ++t)
            if (t < n_tokens && ck.words.find(inst.tokens[t].surface) >= 0)
              nw.context_rows.push_back(ck.words.find(inst.tokens[t].surface));
          if (nw.context_rows.empty()) continue;

          std::vector<Eigen::VectorXd> context = rows_of(ck.words, nw.context_rows);
          std::vector<std::vector<Eigen::VectorXd>> negatives;
          for (int c_row : nw.context_rows) {
            if (word_sampler->probabilities()[c_row] >= 1.0)
              nw.negative_rows.emplace_back();
            else
              nw.negative_rows.push_back(negative_sample(*word_sampler, cfg.k, c_row, rng));
            negatives.push_back(rows_of(ck.words, nw.negative_rows.back()));
          }
          nw.loss = word_loss(states.nodes[node].h, context, negatives);
          objective_sum += nw.loss.objective;
          node_grads.emplace_back(node, -nw.loss.g_h);
          word_losses.push_back(std::move(nw));
        }
      }

      const TreeGradients grads =
          tree_backward(ck.lstm, a.tree.topology, states.nodes, a.inputs, node_grads);
      adagrad_step(ck.lstm, grads.params, lstm_state, cfg.alpha_pw, cfg.lambda_pw,
                   cfg.reg_pretrain);

      if (cfg.update_entity_vectors) {
        std::map<int, Eigen::VectorXd> row_grads;
        auto acc = [&](int row, const Eigen::VectorXd& g) {
          if (row < 0) return;
          auto [it, fresh] = row_grads.try_emplace(row, g);
          if (!fresh) it->second += g;
        };
        acc(ei_row, -el.g_ei);
        acc(ej_row, -el.g_ej);
        for (std::size_t ni = 0; ni < neg_i_rows.size(); ++ni)
          acc(neg_i_rows[ni], -el.g_neg_i[ni]);
        for (std::size_t nj = 0; nj < neg_j_rows.size(); ++nj)
          acc(neg_j_rows[nj], -el.g_neg_j[nj]);
        for (int leaf = 0; leaf < a.tree.n_leaves(); ++leaf)
          acc(a.entity_rows[leaf], grads.inputs[leaf]);
        for (const auto& [row, g] : row_grads)
          adagrad_row(ck.entities, entity_state, row, g, cfg.alpha_pe, cfg.lambda_pe,
                      cfg.reg_pretrain);
      }

      if (cfg.update_word_vectors) {
        std::map<int, Eigen::VectorXd> row_grads;
        auto acc = [&](int row, const Eigen::VectorXd& g) {
          if (row < 0) return;
          auto [it, fresh] = row_grads.try_emplace(row, g);
          if (!fresh) it->second += g;
        };
        for (int leaf = 0; leaf < a.tree.n_leaves(); ++leaf)
          acc(a.word_rows[leaf], grads.inputs[leaf]);
        for (const auto& nw : word_losses) {
          for (std::size_t c = 0; c < nw.context_rows.size(); ++c) {
            acc(nw.context_rows[c], -nw.loss.g_context[c]);
            for (std::size_t ni = 0; ni < nw.negative_rows[c].size(); ++ni)
              acc(nw.negative_rows[c][ni], -nw.loss.g_negatives[c][ni]);
          }
        }
        for (const auto& [row, g] : row_grads)
          adagrad_row(ck.words, word_state, row, g, cfg.alpha_pe, cfg.lambda_pe,
                      cfg.reg_pretrain);
      }
    }
    result.epoch_objective.push_back(train.size() ? objective_sum / train.size() : 0.0);
  }
  return result;
}

namespace {

std::vector<std::string> predict_batch(const Dataset& ds, const TrainConfig& cfg,
                                       const LstmParams& lstm, const ClassifierParams& cls,
                                       const EmbeddingTable& words, const EmbeddingTable& entities,
                                       FeatureDictionary& dict,
                                       const std::vector<std::string>& labels) {
  std::vector<std::string> out;
  out.reserve(ds.size());
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(cls.dim);
  for (const auto& inst : ds.instances) {
    const SparseVector sparse = encode(extract_features(inst), dict);
    Eigen::VectorXd dense = zero;
    if (cfg.use_lstm) {
      const AssembledTree a = assemble_tree(inst, words, entities);
      dense = tree_forward(lstm, a.tree.topology, a.inputs).root_h;
    }
    out.push_back(labels[classify(cls, sparse, dense).label]);
  }
  return out;
}

}  // namespace

FinetuneResult finetune(const Dataset& train, const Dataset& val, const TrainConfig& cfg,
                        const Checkpoint& init) {
  const int dim = init.words.dim;
  if (cfg.use_lstm && init.lstm.dim != dim)
    throw std::invalid_argument("finetune: LSTM and embedding dimensions disagree");

  FeatureDictionary dict;
  for (const auto& inst : train.instances) encode(extract_features(inst), dict);
  dict.freeze();

  const std::vector<std::string> labels = train.label_vocab;
  const int n_labels = static_cast<int>(labels.size());
  if (n_labels == 0) throw std::invalid_argument("finetune: training split has no labels");

  std::vector<SparseVector> sparse(train.size());
  std::vector<int> gold(train.size());
  for (std::size_t i = 0; i < train.size(); ++i) {
    sparse[i] = encode(extract_features(train.instances[i]), dict);
    gold[i] = train.label_index(train.instances[i].relation);
  }

  ClassifierParams cls = ClassifierParams::zeros(n_labels, static_cast<int>(dict.size()), dim);
  LstmParams lstm = init.lstm;
  EmbeddingTable words = init.words;
  EmbeddingTable entities = init.entities;

  Eigen::MatrixXd w_state = Eigen::MatrixXd::Zero(cls.W.rows(), cls.W.cols());
  Eigen::VectorXd b_state = Eigen::VectorXd::Zero(n_labels);
  LstmParams lstm_state = LstmParams::zeros(lstm.dim);
  Eigen::MatrixXd entity_state = Eigen::MatrixXd::Zero(entities.vectors.rows(), dim);
  Eigen::MatrixXd word_state = Eigen::MatrixXd::Zero(words.vectors.rows(), dim);

  const bool upd_entities =
      cfg.use_lstm && cfg.vectors_update_in_finetune_enabled(cfg.update_entity_vectors);
  const bool upd_words =
      cfg.use_lstm && cfg.vectors_update_in_finetune_enabled(cfg.update_word_vectors);

  std::mt19937_64 rng(mix64(cfg.seed, 0xf17eull));
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);

  struct Snapshot {
    ClassifierParams cls;
    LstmParams lstm;
    EmbeddingTable words, entities;
  };
  Snapshot best{cls, lstm, words, entities};

  FinetuneResult result;
  EarlyStopper stopper(cfg.patience);
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(dim);

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t idx : order) {
      const Instance& inst = train.instances[idx];

      Eigen::VectorXd dense = zero;
      AssembledTree a;
      TreeStates states;
      if (cfg.use_lstm) {
        a = assemble_tree(inst, words, entities);
        states = tree_forward(lstm, a.tree.topology, a.inputs);
        dense = states.root_h;
      }

      const ClassifierGrads cg = classifier_loss(cls, sparse[idx], dense, gold[idx]);

      for (int j : sparse[idx].indices)
        adagrad_step(Eigen::Ref<Eigen::VectorXd>(cls.W.col(j)), cg.dlogits,
                     Eigen::Ref<Eigen::VectorXd>(w_state.col(j)), cfg.alpha_fc, cfg.lambda_fc,
                     cfg.reg_finetune);
      adagrad_step(Eigen::Ref<Eigen::VectorXd>(cls.b), cg.dlogits,
                   Eigen::Ref<Eigen::VectorXd>(b_state), cfg.alpha_fc, cfg.lambda_fc,
                   cfg.reg_finetune);

      if (cfg.use_lstm) {
        adagrad_step(Eigen::Ref<Eigen::MatrixXd>(cls.W.middleCols(cls.n_sparse, dim)),
                     cg.dlogits * dense.transpose(),
                     Eigen::Ref<Eigen::MatrixXd>(w_state.middleCols(cls.n_sparse, dim)),
                     cfg.alpha_fc, cfg.lambda_fc, cfg.reg_finetune);

        const TreeGradients grads = tree_backward(
            lstm, a.tree.topology, states.nodes, a.inputs, {{a.tree.topology.root, cg.g_dense}});
        adagrad_step(lstm, grads.params, lstm_state, cfg.alpha_fw, cfg.lambda_fw,
                     cfg.reg_finetune);

        if (upd_entities || upd_words) {
          std::map<int, Eigen::VectorXd> ent_grads, word_grads;
          for (int leaf = 0; leaf < a.tree.n_leaves(); ++leaf) {
            auto acc = [&](std::map<int, Eigen::VectorXd>& m, int row) {
              if (row < 0) return;
              auto [it, fresh] = m.try_emplace(row, grads.inputs[leaf]);
              if (!fresh) it->second += grads.inputs[leaf];
            };
            if (upd_entities) acc(ent_grads, a.entity_rows[leaf]);
            if (upd_words) acc(word_grads, a.word_rows[leaf]);
          }
          for (const auto& [row, g] : ent_grads)
            adagrad_row(entities, entity_state, row, g, cfg.alpha_pe, cfg.lambda_pe,
                        cfg.reg_finetune);
          for (const auto& [row, g] : word_grads)
            adagrad_row(words, word_state, row, g, cfg.alpha_pe, cfg.lambda_pe,
                        cfg.reg_finetune);
        }
      }
    }

    if (val.size() > 0) {
      std::vector<std::string> golds;
      golds.reserve(val.size());
      for (const auto& inst : val.instances) golds.push_back(inst.relation);
      const double acc = accuracy(
          predict_batch(val, cfg, lstm, cls, words, entities, dict, labels), golds);
      result.val_accuracy.push_back(acc);
      const bool stop = stopper.observe(acc);
      if (stopper.improved()) best = Snapshot{cls, lstm, words, entities};
      if (stop) break;
    }
  }
  if (val.size() == 0) best = Snapshot{cls, lstm, words, entities};

  Checkpoint ck;
  ck.dim = dim;
  ck.config = cfg;
  ck.lstm = best.lstm;
  ck.classifier = best.cls;
  ck.words = best.words;
  ck.entities = best.entities;
  ck.feature_names = dict.names();
  ck.label_vocab = labels;

  std::vector<std::string> train_golds;
  train_golds.reserve(train.size());
  for (const auto& inst : train.instances) train_golds.push_back(inst.relation);
  result.train_accuracy = accuracy(predict(ck, train), train_golds);
  result.best_epoch = stopper.best_epoch();
  result.checkpoint = std::move(ck);
  return result;
}

Eigen::VectorXd root_representation(const Checkpoint& model, const Instance& inst) {
  if (!model.config.use_lstm) return Eigen::VectorXd::Zero(model.dim);
  const AssembledTree a = assemble_tree(inst, model.words, model.entities);
  return tree_forward(model.lstm, a.tree.topology, a.inputs).root_h;
}

std::vector<std::string> predict(const Checkpoint& model, const Dataset& ds) {
  if (!model.classifier) throw std::invalid_argument("predict: checkpoint has no classifier");
  FeatureDictionary dict = FeatureDictionary::from_names(model.feature_names, true);
  return predict_batch(ds, model.config, model.lstm, *model.classifier, model.words,
                       model.entities, dict, model.label_vocab);
}

// ---------------------------------------------------------------------------
// serialization

namespace {

const char* reg_name(Reg r) { return r == Reg::L1 ? "l1" : "l2"; }
Reg reg_of(const std::string& s) {
  if (s == "l1") return Reg::L1;
  if (s == "l2") return Reg::L2;
  throw std::invalid_argument("unknown regularization: " + s);
}

const char* fuv_name(int v) { return v < 0 ? "follow" : (v == 0 ? "off" : "on"); }
int fuv_of(const std::string& s) {
  if (s == "follow") return -1;
  if (s == "off") return 0;
  if (s == "on") return 1;
  throw std::invalid_argument("unknown finetune_update_vectors value: " + s);
}

using ConfigText = std::vector<std::pair<std::string, std::string>>;

ConfigText config_entries(const TrainConfig& c) {
  auto num = [](double v) {
    std::ostringstream ss;
    ss.precision(17);
    ss << v;
    return ss.str();
  };
  return {{"preset", c.preset},
          {"alpha_pw", num(c.alpha_pw)},
          {"lambda_pw", num(c.lambda_pw)},
          {"alpha_pe", num(c.alpha_pe)},
          {"lambda_pe", num(c.lambda_pe)},
          {"alpha_fw", num(c.alpha_fw)},
          {"lambda_fw", num(c.lambda_fw)},
          {"alpha_fc", num(c.alpha_fc)},
          {"lambda_fc", num(c.lambda_fc)},
          {"k", std::to_string(c.k)},
          {"use_lstm", c.use_lstm ? "true" : "false"},
          {"use_word_loss", c.use_word_loss ? "true" : "false"},
          {"update_entity_vectors", c.update_entity_vectors ? "true" : "false"},
          {"update_word_vectors", c.update_word_vectors ? "true" : "false"},
          {"finetune_update_vectors", fuv_name(c.finetune_update_vectors)},
          {"context_window", std::to_string(c.context_window)},
          {"max_epochs", std::to_string(c.max_epochs)},
          {"patience", std::to_string(c.patience)},
          {"dim", std::to_string(c.dim)},
          {"seed", std::to_string(c.seed)},
          {"reg_pretrain", reg_name(c.reg_pretrain)},
          {"reg_finetune", reg_name(c.reg_finetune)}};
}

void apply_config_kv_impl(TrainConfig& c, const std::string& key, const std::string& value) {
  auto as_bool = [&] {
    if (value == "true") return true;
    if (value == "false") return false;
    throw std::invalid_argument("config: bad boolean for " + key + ": " + value);
  };
  if (key == "preset") c.preset = value;
  else if (key == "alpha_pw") c.alpha_pw = std::stod(value);
  else if (key == "lambda_pw") c.lambda_pw = std::stod(value);
  else if (key == "alpha_pe") c.alpha_pe = std::stod(value);
  else if (key == "lambda_pe") c.lambda_pe = std::stod(value);
  else if (key == "alpha_fw") c.alpha_fw = std::stod(value);
  else if (key == "lambda_fw") c.lambda_fw = std::stod(value);
  else if (key == "alpha_fc") c.alpha_fc = std::stod(value);
  else if (key == "lambda_fc") c.lambda_fc = std::stod(value);
  else if (key == "k") c.k = std::stoi(value);
  else if (key == "use_lstm") c.use_lstm = as_bool();
  else if (key == "use_word_loss") c.use_word_loss = as_bool();
  else if (key == "update_entity_vectors") c.update_entity_vectors = as_bool();
  else if (key == "update_word_vectors") c.update_word_vectors = as_bool();
  else if (key == "finetune_update_vectors") c.finetune_update_vectors = fuv_of(value);
  else if (key == "context_window") c.context_window = std::stoi(value);
  else if (key == "max_epochs") c.max_epochs = std::stoi(value);
  else if (key == "patience") c.patience = std::stoi(value);
  else if (key == "dim") c.dim = std::stoi(value);
  else if (key == "seed") c.seed = std::stoull(value);
  else if (key == "reg_pretrain") c.reg_pretrain = reg_of(value);
  else if (key == "reg_finetune") c.reg_finetune = reg_of(value);
  else throw std::invalid_argument("config: unknown key: " + key);
}

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json a = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) a.push_back(m(r, c));
  return a;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& a, Eigen::Index rows, Eigen::Index cols) {
  if (static_cast<Eigen::Index>(a.size()) != rows * cols)
    throw std::runtime_error("checkpoint: matrix size mismatch");
  Eigen::MatrixXd m(rows, cols);
  Eigen::Index at = 0;
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = a[at++].get<double>();
  return m;
}

nlohmann::json table_to_json(const EmbeddingTable& t) {
  return {{"kind", t.kind == EmbeddingTable::Kind::Word ? "word" : "entity"},
          {"dim", t.dim},
          {"vocab", t.vocab},
          {"vectors", matrix_to_json(t.vectors)}};
}

EmbeddingTable table_from_json(const nlohmann::json& j) {
  EmbeddingTable t;
  t.kind = j.at("kind").get<std::string>() == "word" ? EmbeddingTable::Kind::Word
                                                     : EmbeddingTable::Kind::Entity;
  t.dim = j.at("dim").get<int>();
  t.vocab = j.at("vocab").get<std::vector<std::string>>();
  t.vectors = matrix_from_json(j.at("vectors"), static_cast<Eigen::Index>(t.vocab.size()), t.dim);
  return t;
}

}  // namespace

void apply_config_kv(TrainConfig& cfg, const std::string& key, const std::string& value) {
  apply_config_kv_impl(cfg, key, value);
}

TrainConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  TrainConfig cfg;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected key = value");
    apply_config_kv(cfg, trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
  return cfg;
}

void save_config(const TrainConfig& cfg, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write config file: " + path);
  for (const auto& [key, value] : config_entries(cfg)) out << key << " = " << value << "\n";
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  nlohmann::json j;
  j["version"] = ckpt.version;
  j["dim"] = ckpt.dim;
  nlohmann::json jc;
  for (const auto& [key, value] : config_entries(ckpt.config)) jc[key] = value;
  j["config"] = jc;
  nlohmann::json gates = nlohmann::json::array();
  for (const auto& g : ckpt.lstm.gates)
    gates.push_back({{"W", matrix_to_json(g.W)},
                     {"U", matrix_to_json(g.U)},
                     {"b", matrix_to_json(g.b)}});
  j["lstm"] = {{"dim", ckpt.lstm.dim}, {"gates", gates}};
  if (ckpt.classifier) {
    const auto& c = *ckpt.classifier;
    j["classifier"] = {{"n_labels", c.n_labels},
                       {"n_sparse", c.n_sparse},
                       {"dim", c.dim},
                       {"W", matrix_to_json(c.W)},
                       {"b", matrix_to_json(c.b)}};
  } else {
    j["classifier"] = nullptr;
  }
  j["words"] = table_to_json(ckpt.words);
  j["entities"] = table_to_json(ckpt.entities);
  j["features"] = ckpt.feature_names;
  j["labels"] = ckpt.label_vocab;

  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  out << j.dump() << "\n";
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(path + ": malformed checkpoint: " + e.what());
  }
  Checkpoint ck;
  ck.version = j.at("version").get<std::string>();
  if (ck.version != "relex-model-v1")
    throw std::runtime_error(path + ": unsupported checkpoint version " + ck.version);
  ck.dim = j.at("dim").get<int>();
  for (const auto& [key, value] : j.at("config").items())
    apply_config_kv(ck.config, key, value.get<std::string>());

  const auto& jl = j.at("lstm");
  ck.lstm = LstmParams::zeros(jl.at("dim").get<int>());
  int gi = 0;
  for (const auto& jg : jl.at("gates")) {
    ck.lstm.gates[gi].W = matrix_from_json(jg.at("W"), ck.lstm.dim, ck.lstm.dim);
    ck.lstm.gates[gi].U = matrix_from_json(jg.at("U"), ck.lstm.dim, ck.lstm.dim);
    ck.lstm.gates[gi].b = matrix_from_json(jg.at("b"), ck.lstm.dim, 1);
    ++gi;
  }

  if (!j.at("classifier").is_null()) {
    const auto& jc = j.at("classifier");
    ClassifierParams c;
    c.n_labels = jc.at("n_labels").get<int>();
    c.n_sparse = jc.at("n_sparse").get<int>();
    c.dim = jc.at("dim").get<int>();
    c.W = matrix_from_json(jc.at("W"), c.n_labels, c.n_sparse + c.dim);
    c.b = matrix_from_json(jc.at("b"), c.n_labels, 1);
    ck.classifier = std::move(c);
  }
  ck.words = table_from_json(j.at("words"));
  ck.entities = table_from_json(j.at("entities"));
  ck.feature_names = j.at("features").get<std::vector<std::string>>();
  ck.label_vocab = j.at("labels").get<std::vector<std::string>>();
  return ck;
}

}  // namespace relex

#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "relex/corpus.hpp"
#include "relex/deppath.hpp"
#include "relex/embed.hpp"
#include "relex/features.hpp"
#include "relex/net.hpp"

namespace relex {

enum class Reg { L1, L2 };

struct TrainConfig {
  double alpha_pw = 0.1, lambda_pw = 0.001;  // LSTM, pre-training
  double alpha_pe = 0.1, lambda_pe = 0.001;  // word/entity vectors
  double alpha_fw = 0.1, lambda_fw = 1e-6;   // LSTM, fine-tuning
  double alpha_fc = 0.1, lambda_fc = 1e-6;   // classifier
  int k = 5;                                 // negative samples per side
  bool use_lstm = true;                      // false only for the B-H baseline
  bool use_word_loss = false;
  bool update_entity_vectors = false;
  bool update_word_vectors = false;
  int finetune_update_vectors = -1;  // -1 follow the flags, 0 off, 1 on
  int context_window = 1;
  int max_epochs = 30;
  int patience = 1;
  int dim = 25;
  std::uint64_t seed = 1;
  Reg reg_pretrain = Reg::L1;
  Reg reg_finetune = Reg::L1;
  std::string preset;

  bool vectors_update_in_finetune_enabled(bool flag) const {
    if (finetune_update_vectors == 0) return false;
    if (finetune_update_vectors == 1) return true;
    return flag;
  }
};

TrainConfig load_config(const std::string& path);
void save_config(const TrainConfig& cfg, const std::string& path);
/// Sets one field by its config-file key ("alpha_fc = 0.1" style values).
void apply_config_kv(TrainConfig& cfg, const std::string& key, const std::string& value);

/// AdaGrad with the regularization term folded into the update:
/// G += g^2;  param -= alpha / (sqrt(G) + 1e-8) * (g + lambda * penalty')
void adagrad_step(Eigen::Ref<Eigen::MatrixXd> param, const Eigen::MatrixXd& grad,
                  Eigen::Ref<Eigen::MatrixXd> state, double alpha, double lambda, Reg reg);
void adagrad_step(Eigen::Ref<Eigen::VectorXd> param, const Eigen::VectorXd& grad,
                  Eigen::Ref<Eigen::VectorXd> state, double alpha, double lambda, Reg reg);
void adagrad_step(LstmParams& param, const LstmParams& grad, LstmParams& state, double alpha,
                  double lambda, Reg reg);

/// sum_k e_i[k] * f[k] * e_j[k]
double trilinear_score(const Eigen::VectorXd& e_i, const Eigen::VectorXd& f,
                       const Eigen::VectorXd& e_j);

// Log likelihood (to be maximized) of the entity-prediction objective with
// k negative replacements on each side, plus its exact gradients.
struct EntityLoss {
  double objective = 0;
  Eigen::VectorXd g_ei, g_ej, g_f;
  std::vector<Eigen::VectorXd> g_neg_i, g_neg_j;
};
EntityLoss entity_loss(const Eigen::VectorXd& e_i, const Eigen::VectorXd& e_j,
                       const Eigen::VectorXd& f, const std::vector<Eigen::VectorXd>& neg_i,
                       const std::vector<Eigen::VectorXd>& neg_j);

// Skip-gram style objective tying a node representation to its context
// words; log likelihood to maximize.
struct WordLoss {
  double objective = 0;
  Eigen::VectorXd g_h;
  std::vector<Eigen::VectorXd> g_context;
  std::vector<std::vector<Eigen::VectorXd>> g_negatives;
};
WordLoss word_loss(const Eigen::VectorXd& h, const std::vector<Eigen::VectorXd>& context,
                   const std::vector<std::vector<Eigen::VectorXd>>& negatives);

// Softmax over label logits on [one-hot sparse ; dense] features.
struct ClassifierParams {
  int n_labels = 0;
  int n_sparse = 0;
  int dim = 0;
  Eigen::MatrixXd W;  // n_labels x (n_sparse + dim)
  Eigen::VectorXd b;

  static ClassifierParams zeros(int n_labels, int n_sparse, int dim);
};

struct Classification {
  Eigen::VectorXd probabilities;
  int label = 0;  // argmax, lowest index on ties
};
Classification classify(const ClassifierParams& c, const SparseVector& sparse,
                        const Eigen::VectorXd& dense);

// Cross-entropy value and gradients for one decision; used by fine-tuning
// and by the gradient-check suite.
struct ClassifierGrads {
  double loss = 0;
  Eigen::VectorXd dlogits;   // probs - onehot(gold)
  Eigen::VectorXd g_dense;   // backprop into the representation
};
ClassifierGrads classifier_loss(const ClassifierParams& c, const SparseVector& sparse,
                                const Eigen::VectorXd& dense, int gold);

struct Checkpoint {
  std::string version = "relex-model-v1";
  int dim = 0;
  TrainConfig config;
  LstmParams lstm;
  std::optional<ClassifierParams> classifier;
  EmbeddingTable words;
  EmbeddingTable entities;
  std::vector<std::string> feature_names;  // frozen dictionary, id order
  std::vector<std::string> label_vocab;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// Tracks best validation performance; stop once it has decayed for
// `patience` consecutive observations.
class EarlyStopper {
 public:
  explicit EarlyStopper(int patience) : patience_(patience) {}
  /// One observation per epoch; returns true when training should stop.
  bool observe(double metric);
  bool improved() const { return improved_; }
  double best() const { return best_; }
  int best_epoch() const { return best_epoch_; }

 private:
  int patience_;
  double best_ = -1;
  int best_epoch_ = -1;
  int bad_ = 0;
  int epoch_ = 0;
  bool improved_ = false;
};

struct PretrainResult {
  Checkpoint checkpoint;
  std::vector<double> epoch_objective;  // mean log likelihood per epoch
};

/// Unsupervised phase: entity-prediction loss at the merge-tree root, and
/// optionally the word-prediction loss at internal nodes. Updates LSTM
/// weights always, embedding tables per the config flags.
PretrainResult pretrain(const Dataset& train, const TrainConfig& cfg,
                        const EmbeddingTable& words, const EmbeddingTable& entities,
                        const LstmParams& lstm_init);

struct FinetuneResult {
  Checkpoint checkpoint;            // best-validation snapshot
  std::vector<double> val_accuracy;
  double train_accuracy = 0;        // of the returned snapshot
  int best_epoch = -1;
};

/// Supervised phase: softmax cross-entropy over [hand-crafted ; root_h],
/// AdaGrad on the classifier and (unless B-H) through the LSTM. Early
/// stopping on validation accuracy.
FinetuneResult finetune(const Dataset& train, const Dataset& val, const TrainConfig& cfg,
                        const Checkpoint& init);

/// Merge-tree root representation of one instance under a model; zero for
/// configurations without the LSTM.
Eigen::VectorXd root_representation(const Checkpoint& model, const Instance& inst);

/// Label predictions; labels unknown to the model can never be produced.
std::vector<std::string> predict(const Checkpoint& model, const Dataset& ds);

}  // namespace relex

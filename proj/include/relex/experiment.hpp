#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "relex/corpus.hpp"
#include "relex/eval.hpp"
#include "relex/train.hpp"

namespace relex {

// The eight experiment variants: two baselines and six pre-trained models.
struct PresetSpec {
  std::string name;
  bool use_lstm = true;
  bool pretrain = false;
  bool use_word_loss = false;
  bool update_entity_vectors = false;
  bool update_word_vectors = false;
};

const std::vector<PresetSpec>& all_presets();
PresetSpec resolve_preset(const std::string& name);  // throws on unknown names

struct MetricsRow {
  std::string experiment;
  std::size_t train_size = 0;
  std::uint64_t seed = 0;
  double macro_p = 0, macro_r = 0, macro_f = 0, micro_p = 0, accuracy = 0;
  std::optional<double> rand_index;
};

std::string metrics_csv_header();
std::string metrics_csv_line(const MetricsRow& row);

/// Metrics of a prediction set; warns once per gold label the model cannot
/// produce (those instances score as always wrong).
MetricsRow score_predictions(const std::vector<std::string>& golds,
                             const std::vector<std::string>& predictions,
                             const std::vector<std::string>& model_labels);

struct RunOptions {
  std::string preset;
  std::string corpus_path;
  std::string embeddings_path;  // empty: seeded random vectors over the corpus vocabulary
  std::string out_dir;
  std::uint64_t seed = 1;
  int threads = 1;
  TrainConfig base_config;
};

/// The full protocol: stratified 70/10/20 split, pre-training on the whole
/// training split where the preset asks for it, then one fine-tuning run per
/// doubling-schedule size. Writes metrics.csv (and the final model) into
/// out_dir, returns the rows in schedule order.
std::vector<MetricsRow> run_experiment(const RunOptions& options);

struct TuneOptions {
  std::string grid_path;
  std::string corpus_path;
  std::string embeddings_path;
  std::string mode;  // "pretrain" | "finetune"
  std::uint64_t seed = 1;
  int threads = 1;
  TrainConfig base_config;
};

struct TuneRow {
  std::vector<std::pair<std::string, double>> values;  // grid assignment
  double macro_p = 0, macro_r = 0, macro_f = 0, accuracy = 0;
  double rand_index = 0;
  double metric = 0;  // ranking key: rand index (pretrain) or accuracy (finetune)
};

/// Cross-product grid evaluation; rows come back sorted by the mode metric,
/// best first.
std::vector<TuneRow> tune(const TuneOptions& options);

/// root_h of every instance under a pre-trained model, for clustering.
std::vector<Eigen::VectorXd> root_representations(const Checkpoint& model, const Dataset& ds);

}  // namespace relex

#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "relex/corpus.hpp"

namespace relex {

struct EmbeddingTable {
  enum class Kind { Word, Entity };

  Kind kind = Kind::Word;
  int dim = 0;
  std::vector<std::string> vocab;    // row order
  Eigen::MatrixXd vectors;           // |vocab| x dim

  int find(const std::string& key) const;
  void add(const std::string& key, const Eigen::VectorXd& v);
  std::size_t size() const { return vocab.size(); }

  /// Uniform rows in [-0.5, 0.5]/dim, the word2vec initialization.
  static EmbeddingTable random_table(Kind kind, const std::vector<std::string>& vocab,
                                     int dim, std::uint64_t seed);

 private:
  mutable std::unordered_map<std::string, int> index_;  // lazy, rebuilt on growth
};

/// Whitespace text format, optional `count dim` header. Duplicate words keep
/// the first row with a warning; a row of the wrong width is an error.
EmbeddingTable load_text_embeddings(const std::string& path);
void save_text_embeddings(const EmbeddingTable& table, const std::string& path);

/// Entity vector = mean over the word vectors of every token of every
/// mention of that entity across the dataset. Out-of-vocabulary tokens
/// contribute nothing; an entity with no known token gets a deterministic
/// small vector.
EmbeddingTable init_entity_vectors(const Dataset& ds, const EmbeddingTable& words);

// Smoothed unigram noise distribution with cdf-based sampling.
class UnigramSampler {
 public:
  UnigramSampler(std::vector<double> counts, double exponent);

  int sample(std::mt19937_64& rng) const;
  std::size_t size() const { return probs_.size(); }
  const std::vector<double>& probabilities() const { return probs_; }

 private:
  std::vector<double> probs_;
  std::vector<double> cdf_;
};

/// k i.i.d. draws; draws equal to `excluded` are redrawn (-1 disables
/// exclusion). Throws when nothing but `excluded` can ever be drawn.
std::vector<int> negative_sample(const UnigramSampler& sampler, int k, int excluded,
                                 std::mt19937_64& rng);

struct SkipgramOptions {
  int dim = 25;
  int window = 2;
  int negatives = 5;
  int epochs = 5;
  double alpha = 0.025;
  double exponent = 0.75;
  std::uint64_t seed = 1;
};

// Value and gradients of the per-pair negative-sampling objective
// log s(c.w) + sum_i log s(-n_i.w), stated as a log likelihood to maximize.
struct SkipgramPair {
  double objective = 0;
  Eigen::VectorXd g_target;
  Eigen::VectorXd g_context;
  std::vector<Eigen::VectorXd> g_negatives;
};
SkipgramPair skipgram_pair(const Eigen::VectorXd& target, const Eigen::VectorXd& context,
                           const std::vector<Eigen::VectorXd>& negatives);

/// Skip-gram with negative sampling over tokenized sentences; returns the
/// input-side vectors. Zero epochs returns the seeded initialization.
EmbeddingTable skipgram_train(const std::vector<std::vector<std::string>>& sentences,
                              const SkipgramOptions& opts);

/// (count_ij - delta) / (count_i * count_j); zero denominator is an error.
double phrase_score(double count_ij, double count_i, double count_j, double delta);

}  // namespace relex

#include "relex/embed.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "relex/util.hpp"

namespace relex {

int EmbeddingTable::find(const std::string& key) const {
  if (index_.size() != vocab.size()) {
    index_.clear();
    for (std::size_t i = 0; i < vocab.size(); ++i) index_.emplace(vocab[i], static_cast<int>(i));
  }
  auto it = index_.find(key);
  return it == index_.end() ? -1 : it->second;
}

void EmbeddingTable::add(const std::string& key, const Eigen::VectorXd& v) {
  vocab.push_back(key);
  vectors.conservativeResize(static_cast<Eigen::Index>(vocab.size()), dim);
  vectors.row(static_cast<Eigen::Index>(vocab.size()) - 1) = v.transpose();
}

EmbeddingTable EmbeddingTable::random_table(Kind kind, const std::vector<std::string>& vocab,
                                            int dim, std::uint64_t seed) {
  EmbeddingTable t;
  t.kind = kind;
  t.dim = dim;
  t.vocab = vocab;
  t.vectors.resize(static_cast<Eigen::Index>(vocab.size()), dim);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  for (Eigen::Index r = 0; r < t.vectors.rows(); ++r)
    for (int c = 0; c < dim; ++c) t.vectors(r, c) = u(rng) / dim;
  return t;
}

EmbeddingTable load_text_embeddings(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open embeddings file: " + path);

  EmbeddingTable table;
  std::vector<Eigen::VectorXd> rows;
  std::unordered_map<std::string, int> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string word;
    ss >> word;
    std::vector<double> values;
    double x;
    while (ss >> x) values.push_back(x);

    // tolerate a "count dim" header as the first line
    if (lineno == 1 && values.size() == 1) {
      double dummy;
      if (std::istringstream(word) >> dummy) continue;
    }
    if (values.empty())
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": no vector values");
    if (table.dim == 0) table.dim = static_cast<int>(values.size());
    if (static_cast<int>(values.size()) != table.dim)
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected " +
                               std::to_string(table.dim) + " values, got " +
                               std::to_string(values.size()));
    if (!seen.emplace(word, 1).second) {
      std::cerr << "warning: duplicate word '" << word << "' at " << path << ":" << lineno
                << ", keeping the first occurrence\n";
      continue;
    }
    table.vocab.push_back(word);
    rows.push_back(Eigen::Map<Eigen::VectorXd>(values.data(), values.size()));
  }
  table.vectors.resize(static_cast<Eigen::Index>(rows.size()), table.dim);
  for (std::size_t i = 0; i < rows.size(); ++i) table.vectors.row(i) = rows[i].transpose();
  return table;
}

void save_text_embeddings(const EmbeddingTable& table, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write embeddings file: " + path);
  out << table.size() << " " << table.dim << "\n";
  out.precision(17);
  for (std::size_t i = 0; i < table.size(); ++i) {
    out << table.vocab[i];
    for (int c = 0; c < table.dim; ++c) out << " " << table.vectors(static_cast<Eigen::Index>(i), c);
    out << "\n";
  }
}

EmbeddingTable init_entity_vectors(const Dataset& ds, const EmbeddingTable& words) {
  // Row-indexed count accumulation keeps the result exactly invariant under
  // dataset reordering.
  std::map<std::string, std::map<int, int>> token_counts;
  for (const auto& inst : ds.instances) {
    for (const Mention* m : {&inst.m1, &inst.m2}) {
      auto& counts = token_counts[m->entity_id];
      for (int i = m->start; i < m->end; ++i) {
        const int row = words.find(inst.tokens[i].surface);
        if (row >= 0) ++counts[row];
      }
    }
  }

  EmbeddingTable table;
  table.kind = EmbeddingTable::Kind::Entity;
  table.dim = words.dim;
  table.vocab = ds.entity_vocab;
  table.vectors.resize(static_cast<Eigen::Index>(table.vocab.size()), table.dim);
  for (std::size_t e = 0; e < table.vocab.size(); ++e) {
    const auto& counts = token_counts[table.vocab[e]];
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(table.dim);
    long total = 0;
    for (const auto& [row, count] : counts) {
      sum += count * words.vectors.row(row).transpose();
      total += count;
    }
    const Eigen::VectorXd mean = total > 0 ? Eigen::VectorXd(sum / static_cast<double>(total))
                                           : fallback_vector(table.vocab[e], table.dim);
    table.vectors.row(static_cast<Eigen::Index>(e)) = mean.transpose();
  }
  return table;
}

UnigramSampler::UnigramSampler(std::vector<double> counts, double exponent) {
  if (counts.empty()) throw std::invalid_argument("sampler needs a nonempty vocabulary");
  probs_.resize(counts.size());
  double total = 0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (counts[i] < 0) throw std::invalid_argument("negative count in sampler");
    probs_[i] = std::pow(counts[i], exponent);
    total += probs_[i];
  }
  if (total <= 0) throw std::invalid_argument("sampler distribution has no mass");
  cdf_.resize(probs_.size());
  double acc = 0;
  for (std::size_t i = 0; i < probs_.size(); ++i) {
    probs_[i] /= total;
    acc += probs_[i];
    cdf_[i] = acc;
  }
  cdf_.back() = 1.0;
}

int UnigramSampler::sample(std::mt19937_64& rng) const {
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
  return static_cast<int>(std::min<std::ptrdiff_t>(it - cdf_.begin(),
                                                   static_cast<std::ptrdiff_t>(cdf_.size()) - 1));
}

std::vector<int> negative_sample(const UnigramSampler& sampler, int k, int excluded,
                                 std::mt19937_64& rng) {
  if (k < 1) throw std::invalid_argument("negative_sample needs k >= 1");
  if (excluded >= 0) {
    if (sampler.size() == 1 && excluded == 0)
      throw std::invalid_argument("cannot sample: the only id is excluded");
    if (sampler.probabilities()[excluded] >= 1.0)
      throw std::invalid_argument("cannot sample: excluded id holds all the mass");
  }
  std::vector<int> out;
  out.reserve(k);
  while (static_cast<int>(out.size()) < k) {
    const int id = sampler.sample(rng);
    if (id == excluded) continue;
    out.push_back(id);
  }
  return out;
}

SkipgramPair skipgram_pair(const Eigen::VectorXd& target, const Eigen::VectorXd& context,
                           const std::vector<Eigen::VectorXd>& negatives) {
  SkipgramPair r;
  const double s_pos = context.dot(target);
  r.objective = log_sigmoid(s_pos);
  const double w_pos = sigmoid(-s_pos);  // d log s(x) / dx
  r.g_target = w_pos * context;
  r.g_context = w_pos * target;
  r.g_negatives.reserve(negatives.size());
  for (const auto& neg : negatives) {
    const double s_neg = neg.dot(target);
    r.objective += log_sigmoid(-s_neg);
    const double w_neg = -sigmoid(s_neg);
    r.g_target += w_neg * neg;
    r.g_negatives.push_back(w_neg * target);
  }
  return r;
}

EmbeddingTable skipgram_train(const std::vector<std::vector<std::string>>& sentences,
                              const SkipgramOptions& opts) {
  std::vector<std::string> vocab;
  std::unordered_map<std::string, int> index;
  std::vector<double> counts;
  std::vector<std::vector<int>> ids(sentences.size());
  for (std::size_t s = 0; s < sentences.size(); ++s) {
    for (const auto& w : sentences[s]) {
      auto it = index.find(w);
      if (it == index.end()) {
        it = index.emplace(w, static_cast<int>(vocab.size())).first;
        vocab.push_back(w);
        counts.push_back(0);
      }
      counts[it->second] += 1;
      ids[s].push_back(it->second);
    }
  }
  if (vocab.empty()) throw std::invalid_argument("skipgram_train needs a nonempty corpus");

  EmbeddingTable table =
      EmbeddingTable::random_table(EmbeddingTable::Kind::Word, vocab, opts.dim, opts.seed);
  Eigen::MatrixXd output = Eigen::MatrixXd::Zero(table.vectors.rows(), opts.dim);
  const UnigramSampler sampler(counts, opts.exponent);
  std::mt19937_64 rng(mix64(opts.seed, 0x7367ull));

  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    for (const auto& sent : ids) {
      for (std::size_t t = 0; t < sent.size(); ++t) {
        for (int off = -opts.window; off <= opts.window; ++off) {
          if (off == 0) continue;
          const std::ptrdiff_t j = static_cast<std::ptrdiff_t>(t) + off;
          if (j < 0 || j >= static_cast<std::ptrdiff_t>(sent.size())) continue;
          const int target = sent[t];
          const int context = sent[j];
          std::vector<int> neg_ids;
          if (opts.negatives > 0 && sampler.probabilities()[context] < 1.0)
            neg_ids = negative_sample(sampler, opts.negatives, context, rng);

          std::vector<Eigen::VectorXd> negs;
          negs.reserve(neg_ids.size());
          for (int nid : neg_ids) negs.push_back(output.row(nid).transpose());
          const SkipgramPair pair =
              skipgram_pair(table.vectors.row(target).transpose(), output.row(context).transpose(), negs);

          // stochastic ascent on the log likelihood
          table.vectors.row(target) += opts.alpha * pair.g_target.transpose();
          output.row(context) += opts.alpha * pair.g_context.transpose();
          for (std::size_t i = 0; i < neg_ids.size(); ++i)
            output.row(neg_ids[i]) += opts.alpha * pair.g_negatives[i].transpose();
        }
      }
    }
  }
  return table;
}

double phrase_score(double count_ij, double count_i, double count_j, double delta) {
  if (count_ij < 0 || count_i < 0 || count_j < 0)
    throw std::invalid_argument("phrase_score counts must be nonnegative");
  const double denom = count_i * count_j;
  if (denom == 0) throw std::domain_error("phrase_score undefined for zero denominator");
  return (count_ij - delta) / denom;
}

}  // namespace relex

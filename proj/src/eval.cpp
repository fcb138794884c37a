#include "relex/eval.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <set>
#include <stdexcept>

namespace relex {

ConfusionCounts ConfusionCounts::from_pairs(const std::vector<std::string>& golds,
                                            const std::vector<std::string>& predictions) {
  if (golds.size() != predictions.size())
    throw std::invalid_argument("gold/prediction length mismatch");
  ConfusionCounts c;
  for (std::size_t i = 0; i < golds.size(); ++i) {
    ++c.by_label[golds[i]].gold;
    ++c.by_label[predictions[i]].extracted;
    if (golds[i] == predictions[i]) ++c.by_label[golds[i]].correct;
  }
  return c;
}

namespace {

double ratio0(long num, long denom) {
  return denom == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(denom);
}

double f_of(double p, double r) { return p + r == 0 ? 0.0 : 2 * p * r / (p + r); }

}  // namespace

Prf label_prf(const ConfusionCounts& counts, const std::string& label) {
  Prf out;
  auto it = counts.by_label.find(label);
  if (it == counts.by_label.end()) return out;
  out.precision = ratio0(it->second.correct, it->second.extracted);
  out.recall = ratio0(it->second.correct, it->second.gold);
  out.f1 = f_of(out.precision, out.recall);
  return out;
}

Prf prf(const ConfusionCounts& counts, Average mode, const std::vector<std::string>& exclude) {
  const std::set<std::string> skip(exclude.begin(), exclude.end());
  Prf out;
  if (mode == Average::Micro) {
    long correct = 0, extracted = 0, gold = 0;
    for (const auto& [label, e] : counts.by_label) {
      if (skip.count(label)) continue;
      correct += e.correct;
      extracted += e.extracted;
      gold += e.gold;
    }
    out.precision = ratio0(correct, extracted);
    out.recall = ratio0(correct, gold);
    out.f1 = f_of(out.precision, out.recall);
    return out;
  }
  int n = 0;
  for (const auto& [label, e] : counts.by_label) {
    if (skip.count(label)) continue;
    if (e.gold == 0 && e.extracted == 0) continue;
    const Prf lp = label_prf(counts, label);
    out.precision += lp.precision;
    out.recall += lp.recall;
    out.f1 += lp.f1;
    ++n;
  }
  if (n > 0) {
    out.precision /= n;
    out.recall /= n;
    out.f1 /= n;
  }
  return out;
}

double accuracy(const std::vector<std::string>& predictions,
                const std::vector<std::string>& golds) {
  if (predictions.size() != golds.size())
    throw std::invalid_argument("accuracy: length mismatch");
  if (golds.empty()) return 0.0;
  long correct = 0;
  for (std::size_t i = 0; i < golds.size(); ++i)
    if (predictions[i] == golds[i]) ++correct;
  return static_cast<double>(correct) / static_cast<double>(golds.size());
}

Partition kmeans(const std::vector<Eigen::VectorXd>& points, int k, std::uint64_t seed,
                 int max_iter) {
  const int n = static_cast<int>(points.size());
  if (k < 1 || k > n) throw std::invalid_argument("kmeans: need 1 <= k <= n");

  std::mt19937_64 rng(seed);
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<Eigen::VectorXd> centroids;
  centroids.reserve(k);
  for (int c = 0; c < k; ++c) centroids.push_back(points[order[c]]);

  Partition assign(n, -1);
  for (int iter = 0; iter < max_iter; ++iter) {
    bool changed = false;
    for (int i = 0; i < n; ++i) {
      int best = 0;
      double best_d = (points[i] - centroids[0]).squaredNorm();
      for (int c = 1; c < k; ++c) {
        const double d = (points[i] - centroids[c]).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (assign[i] != best) {
        assign[i] = best;
        changed = true;
      }
    }
    if (!changed) break;

    std::vector<Eigen::VectorXd> sums(k, Eigen::VectorXd::Zero(points[0].size()));
    std::vector<int> sizes(k, 0);
    for (int i = 0; i < n; ++i) {
      sums[assign[i]] += points[i];
      ++sizes[assign[i]];
    }
    for (int c = 0; c < k; ++c) {
      if (sizes[c] > 0) {
        centroids[c] = sums[c] / sizes[c];
        continue;
      }
      // re-seed an empty cluster from the farthest point
      int far = 0;
      double far_d = -1;
      for (int i = 0; i < n; ++i) {
        const double d = (points[i] - centroids[assign[i]]).squaredNorm();
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      centroids[c] = points[far];
    }
  }
  return assign;
}

double rand_index(const Partition& x, const Partition& y) {
  if (x.size() != y.size()) throw std::invalid_argument("rand_index: partition size mismatch");
  const std::size_t n = x.size();
  if (n < 2) throw std::invalid_argument("rand_index: needs at least 2 items");
  long long agree = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const bool same_x = x[i] == x[j];
      const bool same_y = y[i] == y[j];
      if (same_x == same_y) ++agree;
    }
  }
  const double total = static_cast<double>(n) * (n - 1) / 2.0;
  return agree / total;
}

}  // namespace relex

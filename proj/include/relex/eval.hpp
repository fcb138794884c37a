#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace relex {

enum class Average { Micro, Macro };

struct ConfusionCounts {
  struct Entry {
    long extracted = 0;  // predicted as this label
    long correct = 0;
    long gold = 0;
  };
  std::map<std::string, Entry> by_label;

  static ConfusionCounts from_pairs(const std::vector<std::string>& golds,
                                    const std::vector<std::string>& predictions);
};

struct Prf {
  double precision = 0;
  double recall = 0;
  double f1 = 0;
};

/// Micro pools the numerators and denominators; macro averages per-label
/// values with the zero-denominator-contributes-0 convention. Macro runs
/// over labels present in gold or predictions; `exclude` labels (e.g. a
/// no_relation class) can be dropped from the macro average.
Prf prf(const ConfusionCounts& counts, Average mode,
        const std::vector<std::string>& exclude = {});

/// Per-label precision/recall/F.
Prf label_prf(const ConfusionCounts& counts, const std::string& label);

double accuracy(const std::vector<std::string>& predictions,
                const std::vector<std::string>& golds);

using Partition = std::vector<int>;  // cluster id per item

/// Lloyd's algorithm with seeded distinct-point initialization; an emptied
/// cluster is re-seeded from the point farthest from its centroid.
Partition kmeans(const std::vector<Eigen::VectorXd>& points, int k, std::uint64_t seed,
                 int max_iter = 100);

/// (a + b) / C(n,2): pairs grouped in both partitions plus pairs separated
/// in both.
double rand_index(const Partition& x, const Partition& y);

}  // namespace relex

#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "relex/corpus.hpp"

namespace relex {

// Feature-string to contiguous-id map. Grows while unfrozen, drops unseen
// strings once frozen.
class FeatureDictionary {
 public:
  int lookup_or_add(const std::string& feature);  // -1 when frozen and unseen
  int lookup(const std::string& feature) const;
  void freeze() { frozen_ = true; }
  bool frozen() const { return frozen_; }
  std::size_t size() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }

  static FeatureDictionary from_names(std::vector<std::string> names, bool frozen);

 private:
  std::unordered_map<std::string, int> index_;
  std::vector<std::string> names_;
  bool frozen_ = false;
};

// Binary one-hot encoding: sorted unique indices, implicit value 1.
struct SparseVector {
  std::vector<int> indices;
  int dimension = 0;
};

/// The hand-crafted feature families, namespaced per family:
/// CHUNK (noun/verb chunk between mentions), COLL (collocation windows
/// around the head words), CTX (window-2 context words around the spans),
/// SYN (POS tags along the dependency path), LEX (head words, mention
/// tokens, between-mention unigrams/bigrams) and DEP (path dependency
/// labels, mention-head/parent pairs). Pure function of the instance.
std::vector<std::string> extract_features(const Instance& inst);

SparseVector encode(const std::vector<std::string>& features, FeatureDictionary& dict);

}  // namespace relex

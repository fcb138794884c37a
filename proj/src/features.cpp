#include "relex/features.hpp"

#include <algorithm>
#include <set>
#include <unordered_set>

#include "relex/deppath.hpp"

namespace relex {

int FeatureDictionary::lookup_or_add(const std::string& feature) {
  auto it = index_.find(feature);
  if (it != index_.end()) return it->second;
  if (frozen_) return -1;
  const int id = static_cast<int>(names_.size());
  index_.emplace(feature, id);
  names_.push_back(feature);
  return id;
}

int FeatureDictionary::lookup(const std::string& feature) const {
  auto it = index_.find(feature);
  return it == index_.end() ? -1 : it->second;
}

FeatureDictionary FeatureDictionary::from_names(std::vector<std::string> names, bool frozen) {
  FeatureDictionary d;
  for (auto& n : names) d.lookup_or_add(n);
  d.frozen_ = frozen;
  return d;
}

namespace {

constexpr const char* kLeftBoundary = "<S>";
constexpr const char* kRightBoundary = "</S>";

const std::unordered_set<std::string> kChunkTags = {"NN",  "NNS", "NNP", "NNPS", "VB",
                                                    "VBD", "VBG", "VBN", "VBP",  "VBZ"};

std::string token_or_boundary(const std::vector<Token>& tokens, int i) {
  if (i < 0) return kLeftBoundary;
  if (i >= static_cast<int>(tokens.size())) return kRightBoundary;
  return tokens[i].surface;
}

void collocations(const std::vector<Token>& tokens, int head,
                  std::vector<std::string>& out) {
  static constexpr std::pair<int, int> kWindows[] = {
      {-1, -1}, {+1, +1}, {-2, -1}, {-1, +1}, {+1, +2}};
  for (auto [lo, hi] : kWindows) {
    std::string words;
    for (int off = lo; off <= hi; ++off) {
      if (!words.empty()) words += '_';
      words += token_or_boundary(tokens, head + off);
    }
    char tag[16];
    std::snprintf(tag, sizeof(tag), "%+d,%+d", lo, hi);
    out.push_back("COLL:" + std::string(tag) + ":" + words);
  }
}

}  // namespace

std::vector<std::string> extract_features(const Instance& inst) {
  const auto& tokens = inst.tokens;
  const int n = static_cast<int>(tokens.size());
  std::vector<std::string> out;

  const Mention& first = inst.m1.start <= inst.m2.start ? inst.m1 : inst.m2;
  const Mention& second = inst.m1.start <= inst.m2.start ? inst.m2 : inst.m1;
  const int gap_begin = first.end;
  const int gap_end = std::max(gap_begin, second.start);

  // base chunk: a noun/verb token strictly between the mentions
  for (int i = gap_begin; i < gap_end; ++i) {
    if (kChunkTags.count(tokens[i].pos)) {
      out.push_back("CHUNK:BETWEEN");
      break;
    }
  }

  for (const Mention* m : {&inst.m1, &inst.m2}) collocations(tokens, m->head_word, out);

  // context words, window 2 around each mention span, in-range only
  for (const Mention* m : {&inst.m1, &inst.m2}) {
    for (int i = m->start - 2; i < m->start; ++i)
      if (i >= 0) out.push_back("CTX:W:" + tokens[i].surface);
    for (int i = m->end; i < m->end + 2; ++i)
      if (i < n) out.push_back("CTX:W:" + tokens[i].surface);
  }

  const DepPath path = shortest_path(tokens, inst.m1.head_word, inst.m2.head_word);

  // POS tags along the dependency path
  std::string pos_seq;
  for (int t : path.nodes) {
    if (!pos_seq.empty()) pos_seq += '_';
    pos_seq += tokens[t].pos;
  }
  out.push_back("SYN:PATH_POS:" + pos_seq);

  // lexical family
  out.push_back("LEX:HW1:" + tokens[inst.m1.head_word].surface);
  out.push_back("LEX:HW2:" + tokens[inst.m2.head_word].surface);
  out.push_back("LEX:HW12:" + tokens[inst.m1.head_word].surface + "_" +
                tokens[inst.m2.head_word].surface);
  for (int i = inst.m1.start; i < inst.m1.end; ++i)
    out.push_back("LEX:M1TOK:" + tokens[i].surface);
  for (int i = inst.m2.start; i < inst.m2.end; ++i)
    out.push_back("LEX:M2TOK:" + tokens[i].surface);
  for (int i = gap_begin; i < gap_end; ++i) out.push_back("LEX:UNI:" + tokens[i].surface);
  for (int i = gap_begin; i + 1 < gap_end; ++i)
    out.push_back("LEX:BI:" + tokens[i].surface + "_" + tokens[i + 1].surface);

  // dependency family: labels along the path plus head/parent pairs
  if (path.nodes.size() < 2) {
    out.push_back("DEP:PATH_LABEL:<EMPTY>");
  } else {
    for (std::size_t i = 0; i + 1 < path.nodes.size(); ++i) {
      const int u = path.nodes[i], v = path.nodes[i + 1];
      const std::string& label =
          tokens[u].head == v ? tokens[u].dep_label : tokens[v].dep_label;
      out.push_back("DEP:PATH_LABEL:" + label);
    }
  }
  auto head_pair = [&](const char* ns, int hw) {
    const int parent = tokens[hw].head;
    const std::string parent_surface = parent == -1 ? "<ROOT>" : tokens[parent].surface;
    out.push_back(std::string("DEP:") + ns + ":" + tokens[hw].surface + "_" + parent_surface);
  };
  head_pair("HEAD1", inst.m1.head_word);
  head_pair("HEAD2", inst.m2.head_word);

  return out;
}

SparseVector encode(const std::vector<std::string>& features, FeatureDictionary& dict) {
  std::set<int> ids;
  for (const auto& f : features) {
    const int id = dict.lookup_or_add(f);
    if (id >= 0) ids.insert(id);
  }
  SparseVector v;
  v.indices.assign(ids.begin(), ids.end());
  v.dimension = static_cast<int>(dict.size());
  return v;
}

}  // namespace relex

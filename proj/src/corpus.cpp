#include "relex/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "json.hpp"

namespace relex {

namespace {

const std::unordered_set<std::string> kPrepositionTags = {"IN", "TO"};
const std::unordered_set<std::string> kNounTags = {"NN", "NNS", "NNP", "NNPS"};

bool is_noun(const std::string& pos) { return kNounTags.count(pos) > 0; }

}  // namespace

void Dataset::rebuild_vocab() {
  label_vocab.clear();
  entity_vocab.clear();
  std::unordered_set<std::string> labels, entities;
  for (const auto& inst : instances) {
    if (labels.insert(inst.relation).second) label_vocab.push_back(inst.relation);
    for (const auto* m : {&inst.m1, &inst.m2}) {
      if (entities.insert(m->entity_id).second) entity_vocab.push_back(m->entity_id);
    }
  }
}

int Dataset::label_index(const std::string& label) const {
  auto it = std::find(label_vocab.begin(), label_vocab.end(), label);
  return it == label_vocab.end() ? -1 : static_cast<int>(it - label_vocab.begin());
}

void validate_instance(const Instance& inst, const std::string& where) {
  const int n = static_cast<int>(inst.tokens.size());
  auto fail = [&](const std::string& msg) {
    throw ValidationError(where.empty() ? msg : where + ": " + msg);
  };
  int roots = 0;
  for (int i = 0; i < n; ++i) {
    const Token& t = inst.tokens[i];
    if (t.head == i) fail("token " + std::to_string(i) + " is its own head");
    if (t.head < -1 || t.head >= n)
      fail("token " + std::to_string(i) + " head out of range");
    if (t.head == -1) ++roots;
  }
  if (roots != 1) fail("expected exactly one root, found " + std::to_string(roots));
  for (int i = 0; i < n; ++i) {
    int cur = i;
    int steps = 0;
    while (cur != -1) {
      cur = inst.tokens[cur].head;
      if (++steps > n) fail("dependency heads contain a cycle through token " + std::to_string(i));
    }
  }
  for (const auto* m : {&inst.m1, &inst.m2}) {
    if (m->start < 0 || m->start >= m->end || m->end > n)
      fail("mention span [" + std::to_string(m->start) + "," + std::to_string(m->end) +
           ") outside sentence of length " + std::to_string(n));
  }
}

int head_word(const Mention& m, const std::vector<Token>& tokens) {
  // First preposition in the span with a noun before it wins; the noun
  // closest to that preposition is the head.
  for (int i = m.start; i < m.end; ++i) {
    if (kPrepositionTags.count(tokens[i].pos) == 0) continue;
    for (int j = i - 1; j >= m.start; --j) {
      if (is_noun(tokens[j].pos)) return j;
    }
  }
  for (int j = m.end - 1; j >= m.start; --j) {
    if (is_noun(tokens[j].pos)) return j;
  }
  return m.end - 1;
}

Dataset load_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open corpus file: " + path);
  Dataset ds;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::string where = path + ":" + std::to_string(lineno);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(where + ": malformed JSON: " + e.what());
    }
    Instance inst;
    try {
      int idx = 0;
      for (const auto& jt : j.at("tokens")) {
        Token t;
        t.index = idx++;
        t.surface = jt.at("surface").get<std::string>();
        t.pos = jt.at("pos").get<std::string>();
        t.head = jt.at("head").get<int>();
        t.dep_label = jt.at("dep").get<std::string>();
        inst.tokens.push_back(std::move(t));
      }
      auto read_mention = [&](const nlohmann::json& jm) {
        Mention m;
        m.start = jm.at("start").get<int>();
        m.end = jm.at("end").get<int>();
        m.entity_id = jm.at("entity").get<std::string>();
        return m;
      };
      inst.m1 = read_mention(j.at("m1"));
      inst.m2 = read_mention(j.at("m2"));
      inst.relation = j.at("relation").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(where + ": bad record: " + e.what());
    }
    try {
      validate_instance(inst);
    } catch (const ValidationError& e) {
      throw ValidationError(where + ": " + e.what());
    }
    inst.m1.head_word = head_word(inst.m1, inst.tokens);
    inst.m2.head_word = head_word(inst.m2, inst.tokens);
    ds.instances.push_back(std::move(inst));
  }
  ds.rebuild_vocab();
  return ds;
}

void save_corpus(const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write corpus file: " + path);
  for (const auto& inst : ds.instances) {
    nlohmann::json j;
    auto& jts = j["tokens"] = nlohmann::json::array();
    for (const auto& t : inst.tokens) {
      jts.push_back({{"surface", t.surface},
                     {"pos", t.pos},
                     {"head", t.head},
                     {"dep", t.dep_label}});
    }
    auto write_mention = [](const Mention& m) {
      return nlohmann::json{{"start", m.start}, {"end", m.end}, {"entity", m.entity_id}};
    };
    j["m1"] = write_mention(inst.m1);
    j["m2"] = write_mention(inst.m2);
    j["relation"] = inst.relation;
    out << j.dump() << "\n";
  }
}

namespace {

Dataset make_part(const Dataset& ds, const std::vector<std::size_t>& idx) {
  Dataset part;
  part.instances.reserve(idx.size());
  for (std::size_t i : idx) part.instances.push_back(ds.instances[i]);
  part.rebuild_vocab();
  return part;
}

std::array<Dataset, 3> plain_split(const Dataset& ds, std::array<double, 3> f,
                                   std::uint64_t seed) {
  std::vector<std::size_t> order(ds.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const std::size_t n = ds.size();
  const auto n_tr = static_cast<std::size_t>(std::floor(n * f[0]));
  const auto n_va = static_cast<std::size_t>(std::floor(n * f[1]));
  std::vector<std::size_t> tr(order.begin(), order.begin() + n_tr);
  std::vector<std::size_t> va(order.begin() + n_tr, order.begin() + n_tr + n_va);
  std::vector<std::size_t> te(order.begin() + n_tr + n_va, order.end());
  return {make_part(ds, tr), make_part(ds, va), make_part(ds, te)};
}

}  // namespace

std::array<Dataset, 3> split(const Dataset& ds, std::array<double, 3> fractions,
                             std::uint64_t seed, bool stratified) {
  double sum = fractions[0] + fractions[1] + fractions[2];
  if (fractions[0] <= 0 || fractions[1] <= 0 || fractions[2] <= 0 ||
      std::abs(sum - 1.0) > 1e-9) {
    throw std::invalid_argument("split fractions must be positive and sum to 1");
  }
  if (!stratified) return plain_split(ds, fractions, seed);

  std::unordered_map<std::string, std::vector<std::size_t>> by_label;
  for (std::size_t i = 0; i < ds.size(); ++i) by_label[ds.instances[i].relation].push_back(i);
  for (const auto& label : ds.label_vocab) {
    if (by_label.at(label).size() < 3) {
      std::cerr << "warning: label '" << label
                << "' has fewer than 3 instances, falling back to plain split\n";
      return plain_split(ds, fractions, seed);
    }
  }

  std::mt19937_64 rng(seed);
  std::array<std::vector<std::size_t>, 3> parts;
  for (const auto& label : ds.label_vocab) {
    auto group = by_label.at(label);
    std::shuffle(group.begin(), group.end(), rng);
    const std::size_t c = group.size();
    std::array<std::size_t, 3> take = {
        static_cast<std::size_t>(std::floor(c * fractions[0])),
        static_cast<std::size_t>(std::floor(c * fractions[1])), 0};
    take[2] = c - take[0] - take[1];
    // every part gets at least one instance of this label
    for (int p = 0; p < 3; ++p) {
      while (take[p] == 0) {
        int donor = static_cast<int>(std::max_element(take.begin(), take.end()) - take.begin());
        --take[donor];
        ++take[p];
      }
    }
    std::size_t at = 0;
    for (int p = 0; p < 3; ++p) {
      for (std::size_t k = 0; k < take[p]; ++k) parts[p].push_back(group[at++]);
    }
  }
  return {make_part(ds, parts[0]), make_part(ds, parts[1]), make_part(ds, parts[2])};
}

std::vector<std::size_t> doubling_schedule(std::size_t n_train) {
  if (n_train < 512) {
    throw std::invalid_argument("doubling schedule undefined for n_train < 512");
  }
  std::vector<std::size_t> sizes;
  for (int i = 9; i >= 0; --i) {
    sizes.push_back(static_cast<std::size_t>(
        std::llround(static_cast<double>(n_train) * std::pow(2.0, -i))));
  }
  return sizes;
}

namespace {

// Pronounceable encoding of an integer; distinct codes yield distinct words.
std::string syllable_word(std::uint64_t code) {
  static const char* kSyl[16] = {"ba", "ce", "di", "fo", "gu", "ha", "ki", "lo",
                                 "mu", "ne", "po", "ra", "su", "te", "vi", "zo"};
  std::string w = kSyl[code & 15];
  code >>= 4;
  while (code) {
    w += kSyl[code & 15];
    code >>= 4;
  }
  return w;
}

std::string connective_word(int relation, std::uint64_t variant, int slot) {
  return syllable_word(static_cast<std::uint64_t>(relation) * 1000003ull + variant * 3ull +
                       static_cast<std::uint64_t>(slot));
}

const char* kFirstNames[16] = {"Alda",  "Bram",  "Cleo", "Dov",  "Edra", "Finn",
                               "Gale",  "Hema",  "Iver", "Jory", "Kira", "Lars",
                               "Mira",  "Nico",  "Osa",  "Pria"};
const char* kLastNames[16] = {"Abbot", "Birch", "Calder", "Dray",  "Ellis", "Frost",
                              "Grove", "Hale",  "Inver",  "Joss",  "Keene", "Lowe",
                              "Marsh", "North", "Orr",    "Pike"};

struct Filler {
  const char* surface;
  const char* pos;
};
const Filler kFillers[4] = {{"today", "NN"}, {"again", "RB"}, {"recently", "RB"}, {"downtown", "NN"}};

const char* kDepLabels[6] = {"nsubj", "dobj", "prep", "pobj", "nmod", "advmod"};

}  // namespace

Dataset synth_corpus(std::size_t n, int n_relations, std::uint64_t seed) {
  if (n_relations < 2) throw std::invalid_argument("synth_corpus needs at least 2 relations");
  Dataset ds;
  if (n == 0) return ds;

  std::mt19937_64 rng(seed);

  // 2^-r skew over relations
  std::vector<double> weights(n_relations);
  for (int r = 0; r < n_relations; ++r) weights[r] = std::pow(0.5, r);
  std::discrete_distribution<int> rel_dist(weights.begin(), weights.end());
  const double weight_sum = std::accumulate(weights.begin(), weights.end(), 0.0);

  // paraphrase inventory scales with how often the relation occurs
  std::vector<std::uint64_t> n_variants(n_relations);
  for (int r = 0; r < n_relations; ++r) {
    const double expected = static_cast<double>(n) * weights[r] / weight_sum;
    n_variants[r] = std::max<std::uint64_t>(4, static_cast<std::uint64_t>(std::llround(expected * 0.5)));
  }

  constexpr int kPoolSize = 6;
  auto entity_id = [](int r, char side, int i) {
    return "e" + std::to_string(r) + side + std::to_string(i);
  };
  auto entity_surface = [](const std::string& id) {
    std::uint64_t h = std::hash<std::string>{}(id);
    return std::pair<std::string, std::string>(kFirstNames[h & 15], kLastNames[(h >> 4) & 15]);
  };

  for (std::size_t i = 0; i < n; ++i) {
    // the first pass over the relation set guarantees every label appears
    const int r = i < static_cast<std::size_t>(n_relations) ? static_cast<int>(i)
                                                            : rel_dist(rng);
    const std::uint64_t v = std::uniform_int_distribution<std::uint64_t>(0, n_variants[r] - 1)(rng);
    const int ia = std::uniform_int_distribution<int>(0, kPoolSize - 1)(rng);
    const int ib = std::uniform_int_distribution<int>(0, kPoolSize - 1)(rng);
    const int n_fill = std::uniform_int_distribution<int>(0, 2)(rng);

    Instance inst;
    inst.relation = "rel_" + std::to_string(r);
    auto push_token = [&](const std::string& surface, const std::string& pos) {
      Token t;
      t.index = static_cast<int>(inst.tokens.size());
      t.surface = surface;
      t.pos = pos;
      t.head = t.index - 1;  // left-branching chain, token 0 is the root
      t.dep_label = t.index == 0 ? "root" : kDepLabels[t.index % 6];
      inst.tokens.push_back(std::move(t));
    };

    const std::string id_a = entity_id(r, 'a', ia);
    const std::string id_b = entity_id(r, 'b', ib);
    const auto [first_a, last_a] = entity_surface(id_a);
    const auto [first_b, last_b] = entity_surface(id_b);

    push_token(first_a, "NNP");
    push_token(last_a, "NNP");
    inst.m1 = Mention{0, 2, id_a, -1};

    push_token(connective_word(r, v, 0), "VBZ");
    if (v % 2 == 1) push_token(connective_word(r, v, 2), "RB");
    push_token(connective_word(r, v, 1), "IN");

    const int b_start = static_cast<int>(inst.tokens.size());
    push_token(first_b, "NNP");
    push_token(last_b, "NNP");
    inst.m2 = Mention{b_start, b_start + 2, id_b, -1};

    for (int fi = 0; fi < n_fill; ++fi) {
      const auto& f = kFillers[std::uniform_int_distribution<int>(0, 3)(rng)];
      push_token(f.surface, f.pos);
    }

    inst.m1.head_word = head_word(inst.m1, inst.tokens);
    inst.m2.head_word = head_word(inst.m2, inst.tokens);
    ds.instances.push_back(std::move(inst));
  }
  ds.rebuild_vocab();
  return ds;
}

}  // namespace relex

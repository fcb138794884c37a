#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace relex {

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Token {
  int index = 0;
  std::string surface;
  std::string pos;
  int head = -1;  // -1 marks the syntactic root
  std::string dep_label;
};

struct Mention {
  int start = 0;  // token span [start, end)
  int end = 0;
  std::string entity_id;
  int head_word = -1;  // absolute token index, filled in by head_word()
};

struct Instance {
  std::vector<Token> tokens;
  Mention m1;
  Mention m2;
  std::string relation;
};

struct Dataset {
  std::vector<Instance> instances;
  std::vector<std::string> label_vocab;   // first-appearance order
  std::vector<std::string> entity_vocab;  // first-appearance order

  std::size_t size() const { return instances.size(); }
  /// Rebuilds both vocabularies from the instances, first appearance wins.
  void rebuild_vocab();
  int label_index(const std::string& label) const;  // -1 if unknown
};

/// Checks dependency-tree and span invariants; throws ValidationError.
void validate_instance(const Instance& inst, const std::string& where = {});

/// Head-word heuristic: the noun closest before a preposition if any,
/// otherwise the last noun in the span, otherwise the last token.
int head_word(const Mention& m, const std::vector<Token>& tokens);

/// Reads a JSONL corpus file. Any malformed or invalid line aborts the load
/// with an error naming the line. Mention head words are computed here.
Dataset load_corpus(const std::string& path);

/// Writes the JSONL corpus format; load_corpus(save_corpus(ds)) is identity.
void save_corpus(const Dataset& ds, const std::string& path);

/// Deterministic three-way split. Train and validation sizes are floored,
/// test takes the remainder. With stratified=true every label with >= 3
/// instances lands in all three parts; if any label has < 3 instances the
/// split falls back to the plain random split with a warning.
std::array<Dataset, 3> split(const Dataset& ds, std::array<double, 3> fractions,
                             std::uint64_t seed, bool stratified);

/// The training-size ladder: round(n * 2^-i) for i = 9..0.
std::vector<std::size_t> doubling_schedule(std::size_t n_train);

/// Synthetic relation corpus with a 2^-r skewed label distribution,
/// left-branching dependency trees and per-relation entity pools.
Dataset synth_corpus(std::size_t n, int n_relations, std::uint64_t seed);

}  // namespace relex

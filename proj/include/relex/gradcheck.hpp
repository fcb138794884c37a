#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace relex {

struct GradCheckReport {
  std::string component;
  int configs = 0;
  double max_error = 0;
};

struct GradCheckSummary {
  std::vector<GradCheckReport> components;
  double max_error = 0;
  bool passed(double tolerance = 1e-4) const { return max_error < tolerance; }
};

/// Finite-difference verification of every hand-derived gradient: chain
/// LSTM, merge-tree LSTM (parameters and leaf inputs), entity-prediction
/// loss, word-prediction loss and the fine-tuning softmax. `configs` random
/// configurations per component, d <= 8, trees <= 5 leaves, h = 1e-5.
GradCheckSummary run_gradient_suite(int configs, std::uint64_t seed);

}  // namespace relex

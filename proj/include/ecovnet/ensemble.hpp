#pragma once

#include <vector>

#include "ecovnet/errors.hpp"

// Combining per-snapshot softmax outputs: plurality voting over argmax labels
// (hard) or averaging the probability vectors (soft), in both cases over the
// last m snapshots of the run.

namespace ecov {

struct PredictionSet {
  // probs[sample][snapshot][class], snapshots in cycle order
  std::vector<std::vector<std::vector<double>>> probs;
  int m = 0; // how many of the most recent snapshots to use

  int snapshots() const { return probs.empty() ? 0 : static_cast<int>(probs[0].size()); }
  int classes() const {
    return probs.empty() || probs[0].empty() ? 0 : static_cast<int>(probs[0][0].size());
  }
};

void validate_prediction_set(const PredictionSet& pset);

// Each used snapshot votes its argmax; the plurality wins. Vote ties fall back
// to the mean soft probability among the tied classes, then the lowest index.
std::vector<int> hard_ensemble(const PredictionSet& pset);

struct SoftEnsembleResult {
  std::vector<int> labels;
  std::vector<std::vector<double>> mean_probs;
};

SoftEnsembleResult soft_ensemble(const PredictionSet& pset);

} // namespace ecov

#include "ecovnet/ensemble.hpp"

#include <cmath>
#include <string>

namespace ecov {

void validate_prediction_set(const PredictionSet& pset) {
  if (pset.probs.empty()) throw ArgumentError("ensemble: prediction set has no samples");
  const size_t n_snap = pset.probs[0].size();
  if (n_snap == 0) throw ArgumentError("ensemble: prediction set has no snapshots");
  const size_t n_cls = pset.probs[0][0].size();
  if (n_cls == 0) throw ArgumentError("ensemble: prediction set has no classes");
  if (pset.m < 1) throw ArgumentError("ensemble: m must be >= 1");
  if (static_cast<size_t>(pset.m) > n_snap)
    throw ArgumentError("ensemble: m " + std::to_string(pset.m) + " exceeds snapshot count " +
                        std::to_string(n_snap));
  for (const auto& sample : pset.probs) {
    if (sample.size() != n_snap)
      throw DimensionError("ensemble: ragged snapshot counts across samples");
    for (const auto& vec : sample) {
      if (vec.size() != n_cls) throw DimensionError("ensemble: ragged class counts across vectors");
      double sum = 0.0;
      for (const double p : vec) {
        if (p < 0.0) throw ArgumentError("ensemble: negative probability");
        sum += p;
      }
      if (std::abs(sum - 1.0) > 1e-6)
        throw ArgumentError("ensemble: probability vector sums to " + std::to_string(sum));
    }
  }
}

namespace {

int argmax(const std::vector<double>& v) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(v.size()); ++i)
    if (v[static_cast<size_t>(i)] > v[static_cast<size_t>(best)]) best = i;
  return best;
}

std::vector<double> mean_of_last_m(const std::vector<std::vector<double>>& vectors, int m) {
  const size_t n_cls = vectors[0].size();
  const size_t first = vectors.size() - static_cast<size_t>(m);
  std::vector<double> mean(n_cls, 0.0);
  for (size_t s = first; s < vectors.size(); ++s)
    for (size_t c = 0; c < n_cls; ++c) mean[c] += vectors[s][c];
  for (auto& v : mean) v /= static_cast<double>(m);
  return mean;
}

} // namespace

std::vector<int> hard_ensemble(const PredictionSet& pset) {
  validate_prediction_set(pset);
  const int n_cls = pset.classes();
  std::vector<int> out;
  out.reserve(pset.probs.size());

  for (const auto& sample : pset.probs) {
    std::vector<int> votes(static_cast<size_t>(n_cls), 0);
    const size_t first = sample.size() - static_cast<size_t>(pset.m);
    for (size_t s = first; s < sample.size(); ++s) ++votes[static_cast<size_t>(argmax(sample[s]))];

    int top = 0;
    for (int c = 1; c < n_cls; ++c)
      if (votes[static_cast<size_t>(c)] > votes[static_cast<size_t>(top)]) top = c;

    std::vector<int> tied;
    for (int c = 0; c < n_cls; ++c)
      if (votes[static_cast<size_t>(c)] == votes[static_cast<size_t>(top)]) tied.push_back(c);

    if (tied.size() > 1) {
      const auto mean = mean_of_last_m(sample, pset.m);
      top = tied[0];
      for (const int c : tied)
        if (mean[static_cast<size_t>(c)] > mean[static_cast<size_t>(top)]) top = c;
    }
    out.push_back(top);
  }
  return out;
}

SoftEnsembleResult soft_ensemble(const PredictionSet& pset) {
  validate_prediction_set(pset);
  SoftEnsembleResult res;
  res.labels.reserve(pset.probs.size());
  res.mean_probs.reserve(pset.probs.size());
  for (const auto& sample : pset.probs) {
    auto mean = mean_of_last_m(sample, pset.m);
    res.labels.push_back(argmax(mean));
    res.mean_probs.push_back(std::move(mean));
  }
  return res;
}

} // namespace ecov

#pragma once

#include <cmath>
#include <cstdint>
#include <iomanip>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "ecovnet/augment.hpp"
#include "ecovnet/dataset.hpp"
#include "ecovnet/model.hpp"

// Adam training under a cyclic cosine-annealing schedule. The learning rate
// restarts at the top of each cycle and the parameters at each cycle's last
// epoch are deep-copied into the returned bundle, giving an ensemble of
// snapshots from a single run.

namespace ecov {

enum class ClassWeightMode { kNone, kInverseFrequency };

struct TrainConfig {
  int total_epochs = 25;
  int batch_size = 8;
  double initial_lr = 1e-4;
  int cycles = 5;
  uint64_t seed = 1;
  ClassWeightMode weight_mode = ClassWeightMode::kInverseFrequency;
  bool augment = true;
  AugmentRanges ranges{};

  int cycle_length() const { return (total_epochs + cycles - 1) / cycles; }

  void validate() const {
    if (cycles < 1) throw ArgumentError("train config: cycles must be >= 1");
    if (total_epochs < cycles)
      throw ArgumentError("train config: total epochs " + std::to_string(total_epochs) +
                          " must be >= cycles " + std::to_string(cycles));
    if (batch_size < 1) throw ArgumentError("train config: batch size must be >= 1");
    if (!(initial_lr > 0)) throw ArgumentError("train config: initial learning rate must be positive");
    const int len = cycle_length();
    if ((total_epochs + len - 1) / len != cycles)
      throw ArgumentError("train config: " + std::to_string(total_epochs) + " epochs cannot form " +
                          std::to_string(cycles) + " cycles of length " + std::to_string(len));
    validate_ranges(ranges);
  }
};

// Annealed rate for one-based epoch t: restarts at the start of every cycle
// and decays along a half cosine within it.
inline double cosine_lr(int t, const TrainConfig& cfg) {
  if (t < 1 || t > cfg.total_epochs)
    throw ArgumentError("cosine_lr: epoch " + std::to_string(t) + " outside 1.." +
                        std::to_string(cfg.total_epochs));
  const double len = static_cast<double>(cfg.cycle_length());
  const double pos = static_cast<double>((t - 1) % cfg.cycle_length());
  return cfg.initial_lr / 2.0 * (std::cos(std::numbers::pi * pos / len) + 1.0);
}

inline bool is_snapshot_epoch(int t, const TrainConfig& cfg) {
  return t % cfg.cycle_length() == 0 || t == cfg.total_epochs;
}

// Inverse-frequency weights: w_i = N / (C * count_i).
inline std::vector<double> class_weights(const std::vector<int64_t>& counts) {
  if (counts.empty()) throw ArgumentError("class_weights: empty histogram");
  int64_t total = 0;
  for (size_t i = 0; i < counts.size(); ++i) {
    if (counts[i] < 1)
      throw ArgumentError("class_weights: class " + std::to_string(i) + " has no samples");
    total += counts[i];
  }
  std::vector<double> w(counts.size());
  for (size_t i = 0; i < counts.size(); ++i)
    w[i] = static_cast<double>(total) / (static_cast<double>(counts.size()) * static_cast<double>(counts[i]));
  return w;
}

template <typename T>
struct AdamState {
  std::vector<Tensor<T>> m, v; // aligned with the trainable params in order
  int64_t step = 0;
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;
};

template <typename T>
AdamState<T> make_adam_state(const std::vector<ParamView<T>>& params) {
  AdamState<T> state;
  for (const auto& p : params)
    if (p.trainable) {
      state.m.emplace_back(p.tensor->shape());
      state.v.emplace_back(p.tensor->shape());
    }
  return state;
}

template <typename T>
void adam_step(std::vector<ParamView<T>>& params, AdamState<T>& state, double lr) {
  if (!(lr > 0)) throw ArgumentError("adam_step: learning rate must be positive");
  state.step += 1;
  const double b1 = AdamState<T>::kBeta1, b2 = AdamState<T>::kBeta2;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(state.step));

  size_t slot = 0;
  for (auto& p : params) {
    if (!p.trainable) continue;
    if (slot >= state.m.size()) throw ArgumentError("adam_step: state does not match parameter list");
    Tensor<T>& m = state.m[slot];
    Tensor<T>& v = state.v[slot];
    ++slot;
    Tensor<T>& th = *p.tensor;
    for (int64_t i = 0; i < th.numel(); ++i) {
      const double g = th.has_grad() ? static_cast<double>(th.grad()[static_cast<size_t>(i)]) : 0.0;
      if (!std::isfinite(g))
        throw NumericError("adam_step: non-finite gradient in parameter '" + p.name + "'");
      const double mi = b1 * static_cast<double>(m[i]) + (1.0 - b1) * g;
      const double vi = b2 * static_cast<double>(v[i]) + (1.0 - b2) * g * g;
      m[i] = static_cast<T>(mi);
      v[i] = static_cast<T>(vi);
      const double m_hat = mi / bc1;
      const double v_hat = vi / bc2;
      th[i] = static_cast<T>(static_cast<double>(th[i]) -
                             lr * m_hat / (std::sqrt(v_hat) + AdamState<T>::kEps));
    }
  }
}

template <typename T>
struct Snapshot {
  int cycle = 0;
  double train_loss = 0.0;
  double val_acc = 0.0;
  std::vector<std::pair<std::string, Tensor<T>>> tensors; // includes BN running stats
};

template <typename T>
struct SnapshotBundle {
  TrainConfig config;
  std::vector<Snapshot<T>> snapshots;
};

template <typename T>
Snapshot<T> snapshot_from_model(Model<T>& model, int cycle, double train_loss, double val_acc) {
  Snapshot<T> snap;
  snap.cycle = cycle;
  snap.train_loss = train_loss;
  snap.val_acc = val_acc;
  for (const auto& p : model.params()) snap.tensors.emplace_back(p.name, *p.tensor);
  return snap;
}

template <typename T>
void apply_snapshot(Model<T>& model, const Snapshot<T>& snap) {
  auto views = model.params();
  if (views.size() != snap.tensors.size())
    throw DataError("apply_snapshot: model has " + std::to_string(views.size()) +
                    " tensors but snapshot has " + std::to_string(snap.tensors.size()));
  for (size_t i = 0; i < views.size(); ++i) {
    const auto& [name, value] = snap.tensors[i];
    if (views[i].name != name)
      throw DataError("apply_snapshot: tensor '" + name + "' does not match model tensor '" +
                      views[i].name + "'");
    if (!views[i].tensor->same_shape(value))
      throw DataError("apply_snapshot: shape mismatch for tensor '" + name + "'");
    *views[i].tensor = value;
  }
}

namespace detail {

template <typename T>
Tensor<T> assemble_batch(const LabeledData<T>& data, const std::vector<int64_t>& order, int64_t from,
                         int64_t count, bool augment, const AugmentRanges& ranges, uint64_t seed,
                         int epoch) {
  const auto& first = data.images[static_cast<size_t>(order[static_cast<size_t>(from)])];
  Tensor<T> batch({count, first.dim(0), first.dim(1), first.dim(2)});
  const int64_t plane = first.numel();
  for (int64_t b = 0; b < count; ++b) {
    const int64_t idx = order[static_cast<size_t>(from + b)];
    const Tensor<T>& img = data.images[static_cast<size_t>(idx)];
    if (!img.same_shape(first))
      throw DimensionError("train: images in a batch must share a shape");
    if (augment) {
      Rng img_rng(mix_seed(seed, static_cast<uint64_t>(epoch),
                           static_cast<uint64_t>(idx) ^ 0x41464649ULL));
      Tensor<T> aug = apply_affine(img, sample_affine(ranges, img_rng));
      for (int64_t i = 0; i < plane; ++i) batch[b * plane + i] = aug[i];
    } else {
      for (int64_t i = 0; i < plane; ++i) batch[b * plane + i] = img[i];
    }
  }
  return batch;
}

template <typename T>
Tensor<T> onehot_rows(const LabeledData<T>& data, const std::vector<int64_t>& order, int64_t from,
                      int64_t count, int num_classes) {
  Tensor<T> y({count, static_cast<int64_t>(num_classes)});
  for (int64_t b = 0; b < count; ++b) {
    const int label = data.labels[static_cast<size_t>(order[static_cast<size_t>(from + b)])];
    if (label < 0 || label >= num_classes)
      throw ArgumentError("train: label " + std::to_string(label) + " outside class range");
    y.at(b, label) = T(1);
  }
  return y;
}

} // namespace detail

// Inference pass over a whole split: mean unweighted cross-entropy and top-1
// accuracy.
template <typename T>
std::pair<double, double> evaluate_split(Model<T>& model, const LabeledData<T>& data, int batch_size) {
  const int64_t n = static_cast<int64_t>(data.images.size());
  if (n == 0) throw ArgumentError("evaluate_split: empty split");
  std::vector<int64_t> order(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;

  Rng unused(0);
  const int num_classes = model.spec().num_classes;
  double loss_sum = 0.0;
  int64_t correct = 0;
  for (int64_t from = 0; from < n; from += batch_size) {
    const int64_t count = std::min<int64_t>(batch_size, n - from);
    Tensor<T> batch = detail::assemble_batch(data, order, from, count, false, AugmentRanges{}, 0, 0);
    Tensor<T> onehot = detail::onehot_rows(data, order, from, count, num_classes);
    auto res = model.forward(batch, Mode::kInference, unused);
    loss_sum += static_cast<double>(cross_entropy_loss(res.probs, onehot, std::vector<T>{}, T(0), T(0),
                                                       std::span<const Tensor<T>* const>{})) *
                static_cast<double>(count);
    for (int64_t b = 0; b < count; ++b) {
      int best = 0;
      for (int c = 1; c < num_classes; ++c)
        if (res.probs.at(b, c) > res.probs.at(b, best)) best = c;
      if (best == data.labels[static_cast<size_t>(order[static_cast<size_t>(from + b)])]) ++correct;
    }
  }
  return {loss_sum / static_cast<double>(n), static_cast<double>(correct) / static_cast<double>(n)};
}

template <typename T>
SnapshotBundle<T> train_with_snapshots(Model<T>& model, const LabeledData<T>& train,
                                       const LabeledData<T>& val, const TrainConfig& cfg,
                                       std::ostream* log = nullptr) {
  cfg.validate();
  if (train.images.empty() || val.images.empty())
    throw ArgumentError("train: training and validation splits must be nonempty");
  const int num_classes = model.spec().num_classes;

  std::vector<T> weights;
  if (cfg.weight_mode == ClassWeightMode::kInverseFrequency) {
    std::vector<int64_t> counts(static_cast<size_t>(num_classes), 0);
    for (int label : train.labels) {
      if (label < 0 || label >= num_classes)
        throw ArgumentError("train: label " + std::to_string(label) + " outside class range");
      ++counts[static_cast<size_t>(label)];
    }
    for (double w : class_weights(counts)) weights.push_back(static_cast<T>(w));
  }

  auto params = model.params();
  AdamState<T> state = make_adam_state(params);

  std::vector<const Tensor<T>*> reg_const;
  std::vector<Tensor<T>*> reg_mut;
  for (const auto& p : params)
    if (p.regularized) {
      reg_const.push_back(p.tensor);
      reg_mut.push_back(p.tensor);
    }
  const T l1 = static_cast<T>(model.spec().l1);
  const T l2 = static_cast<T>(model.spec().l2);

  SnapshotBundle<T> bundle;
  bundle.config = cfg;

  const int64_t n = static_cast<int64_t>(train.images.size());
  std::vector<int64_t> order(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;

  if (log)
    *log << "epoch,lr,train_loss,val_loss,val_acc\n";

  for (int t = 1; t <= cfg.total_epochs; ++t) {
    const double lr = cosine_lr(t, cfg);
    Rng shuffle_rng(mix_seed(cfg.seed, static_cast<uint64_t>(t), 0x53485546ULL));
    for (int64_t i = n - 1; i > 0; --i) {
      const int64_t j = static_cast<int64_t>(shuffle_rng.below(static_cast<uint64_t>(i + 1)));
      std::swap(order[static_cast<size_t>(i)], order[static_cast<size_t>(j)]);
    }
    Rng drop_rng(mix_seed(cfg.seed, static_cast<uint64_t>(t), 0x44524f50ULL));

    double loss_sum = 0.0;
    for (int64_t from = 0; from < n; from += cfg.batch_size) {
      const int64_t count = std::min<int64_t>(cfg.batch_size, n - from);
      Tensor<T> batch =
          detail::assemble_batch(train, order, from, count, cfg.augment, cfg.ranges, cfg.seed, t);
      Tensor<T> onehot = detail::onehot_rows(train, order, from, count, num_classes);

      auto res = model.forward(batch, Mode::kTraining, drop_rng);
      const T loss = cross_entropy_loss(res.probs, onehot, weights, l1, l2,
                                        std::span<const Tensor<T>* const>(reg_const));
      model.zero_grads();
      Tensor<T> dlogits = softmax_ce_grad(res.probs, onehot, weights);
      model.backward(dlogits);
      add_reg_grads(l1, l2, std::span<Tensor<T>* const>(reg_mut));
      adam_step(params, state, lr);
      loss_sum += static_cast<double>(loss) * static_cast<double>(count);
    }
    const double train_loss = loss_sum / static_cast<double>(n);
    const auto [val_loss, val_acc] = evaluate_split(model, val, cfg.batch_size);

    if (log) {
      *log << t << ',' << std::setprecision(10) << lr << ',' << train_loss << ',' << val_loss << ','
           << val_acc << '\n';
    }

    if (is_snapshot_epoch(t, cfg)) {
      const int cycle = static_cast<int>(bundle.snapshots.size()) + 1;
      bundle.snapshots.push_back(snapshot_from_model(model, cycle, train_loss, val_acc));
    }
  }

  if (static_cast<int>(bundle.snapshots.size()) != cfg.cycles)
    throw NumericError("train: produced " + std::to_string(bundle.snapshots.size()) +
                       " snapshots, expected " + std::to_string(cfg.cycles));
  return bundle;
}

} // namespace ecov

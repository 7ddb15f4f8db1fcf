// Acceptance runner: executes the eight release criteria and prints one
// PASS or FAIL line for each. Exit status is the number of failed criteria.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "ecovnet/arch.hpp"
#include "ecovnet/dataset.hpp"
#include "ecovnet/ensemble.hpp"
#include "ecovnet/gradcam.hpp"
#include "ecovnet/grad_check.hpp"
#include "ecovnet/metrics.hpp"
#include "ecovnet/model.hpp"
#include "ecovnet/ops.hpp"
#include "ecovnet/rng.hpp"
#include "ecovnet/runners.hpp"
#include "ecovnet/snapshot_io.hpp"
#include "ecovnet/trainer.hpp"
#include "grad_harness.hpp"

namespace fs = std::filesystem;
using ecov::Act;
using ecov::Mode;
using ecov::Padding;
using ecov::Rng;
using ecov::TensorD;
using ecov::testing::mutated_rel_err;
using ecov::testing::rand_tensor;
using ecov::testing::rand_tensor_offzero;

using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::vector<uint8_t> slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ecov::DataError("acceptance: cannot open '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

double project(const TensorD& y, const TensorD& weights) {
  double s = 0;
  for (int64_t i = 0; i < y.numel(); ++i) s += y[i] * weights[i];
  return s;
}

TensorD grad_of(const TensorD& t) {
  TensorD g(t.shape());
  for (int64_t i = 0; i < g.numel(); ++i) g[i] = t.grad()[static_cast<size_t>(i)];
  return g;
}

// ---- criterion 1 -----------------------------------------------------------

struct GradSummary {
  double worst = 0.0;
  double weakest_mutation = 1e300;
  int checks = 0;
};

void track(GradSummary& s, double err) {
  s.worst = std::max(s.worst, err);
  ++s.checks;
}

GradSummary run_gradient_checks() {
  constexpr double kTol = 1e-5;
  GradSummary s;
  auto require = [&](double err) {
    track(s, err);
    if (err > kTol)
      throw ecov::NumericError("gradient check exceeded tolerance: " + std::to_string(err));
  };
  auto mutation = [&](double err) {
    s.weakest_mutation = std::min(s.weakest_mutation, err);
    if (err < 0.1)
      throw ecov::NumericError("planted gradient defect went unnoticed: " + std::to_string(err));
  };

  Rng rng(2024);

  { // plain convolution
    struct Shape {
      std::vector<int64_t> x, k;
      int stride;
      Padding pad;
    };
    const Shape shapes[] = {
        {{1, 1, 5, 5}, {2, 1, 3, 3}, 1, Padding::kSame},
        {{2, 3, 6, 6}, {4, 3, 3, 3}, 2, Padding::kSame},
        {{1, 2, 7, 7}, {3, 2, 5, 5}, 1, Padding::kValid},
    };
    bool mutated = false;
    for (const auto& sh : shapes) {
      TensorD x = rand_tensor(sh.x, rng);
      TensorD k = rand_tensor(sh.k, rng, -0.5, 0.5);
      const TensorD probe = rand_tensor(ecov::conv2d(x, k, sh.stride, sh.pad).shape(), rng);
      auto loss = [&]() { return project(ecov::conv2d(x, k, sh.stride, sh.pad), probe); };
      x.zero_grad();
      k.zero_grad();
      ecov::conv2d_backward(x, k, sh.stride, sh.pad, probe);
      TensorD gx = grad_of(x), gk = grad_of(k);
      require(ecov::grad_check(loss, gx, x).max_rel_err);
      require(ecov::grad_check(loss, gk, k).max_rel_err);
      if (!mutated) {
        mutation(mutated_rel_err(loss, gx, x));
        mutated = true;
      }
    }
  }

  { // depthwise convolution
    struct Shape {
      std::vector<int64_t> x, k;
      int stride;
    };
    const Shape shapes[] = {
        {{1, 3, 5, 5}, {3, 3, 3}, 1},
        {{2, 4, 6, 6}, {4, 5, 5}, 2},
        {{1, 2, 4, 4}, {2, 1, 1}, 1},
    };
    bool mutated = false;
    for (const auto& sh : shapes) {
      TensorD x = rand_tensor(sh.x, rng);
      TensorD k = rand_tensor(sh.k, rng, -0.5, 0.5);
      const TensorD probe =
          rand_tensor(ecov::depthwise_conv2d(x, k, sh.stride, Padding::kSame).shape(), rng);
      auto loss = [&]() {
        return project(ecov::depthwise_conv2d(x, k, sh.stride, Padding::kSame), probe);
      };
      x.zero_grad();
      k.zero_grad();
      ecov::depthwise_conv2d_backward(x, k, sh.stride, Padding::kSame, probe);
      TensorD gx = grad_of(x), gk = grad_of(k);
      require(ecov::grad_check(loss, gx, x).max_rel_err);
      require(ecov::grad_check(loss, gk, k).max_rel_err);
      if (!mutated) {
        mutation(mutated_rel_err(loss, gk, k));
        mutated = true;
      }
    }
  }

  { // batch normalization, training statistics
    const std::vector<std::vector<int64_t>> shapes = {{4, 3}, {3, 2, 2, 2}, {5, 4}};
    bool mutated = false;
    for (const auto& sh : shapes) {
      const int64_t c = sh[1];
      TensorD x = rand_tensor(sh, rng);
      TensorD gamma = rand_tensor({c}, rng, 0.5, 1.5);
      TensorD beta = rand_tensor({c}, rng, -0.5, 0.5);
      TensorD rm({c}), rv = TensorD::full({c}, 1.0);
      const TensorD probe = rand_tensor(sh, rng);
      auto loss = [&]() {
        TensorD m = rm, v = rv;
        return project(ecov::batch_norm(x, gamma, beta, m, v, 1e-3, 0.99, Mode::kTraining), probe);
      };
      ecov::BnCache<double> cache;
      TensorD m = rm, v = rv;
      ecov::batch_norm(x, gamma, beta, m, v, 1e-3, 0.99, Mode::kTraining, &cache);
      x.zero_grad();
      gamma.zero_grad();
      beta.zero_grad();
      ecov::batch_norm_backward(x, gamma, beta, cache, probe);
      TensorD gx = grad_of(x), gg = grad_of(gamma), gb = grad_of(beta);
      require(ecov::grad_check(loss, gx, x).max_rel_err);
      require(ecov::grad_check(loss, gg, gamma).max_rel_err);
      require(ecov::grad_check(loss, gb, beta).max_rel_err);
      if (!mutated) {
        mutation(mutated_rel_err(loss, gx, x));
        mutated = true;
      }
    }
  }

  { // swish
    const std::vector<std::vector<int64_t>> shapes = {{7}, {2, 3}, {1, 2, 2, 2}};
    bool mutated = false;
    for (const auto& sh : shapes) {
      TensorD x = rand_tensor_offzero(sh, rng);
      const TensorD probe = rand_tensor(sh, rng);
      auto loss = [&]() { return project(ecov::activation(Act::kSwish, x), probe); };
      x.zero_grad();
      ecov::activation_backward(Act::kSwish, x, probe);
      TensorD gx = grad_of(x);
      require(ecov::grad_check(loss, gx, x).max_rel_err);
      if (!mutated) {
        mutation(mutated_rel_err(loss, gx, x));
        mutated = true;
      }
    }
  }

  { // squeeze and excitation
    struct Shape {
      int64_t n, c, hw;
      int ratio;
    };
    const Shape shapes[] = {{1, 8, 2, 4}, {2, 4, 3, 2}, {1, 6, 2, 3}};
    bool mutated = false;
    for (const auto& sh : shapes) {
      Rng prng(900 + static_cast<uint64_t>(sh.c));
      auto p = ecov::make_se_params<double>(sh.c, sh.ratio, prng);
      TensorD x = rand_tensor({sh.n, sh.c, sh.hw, sh.hw}, rng);
      const TensorD probe = rand_tensor(x.shape(), rng);
      auto loss = [&]() { return project(ecov::squeeze_excite(x, sh.ratio, p), probe); };
      ecov::SeCache<double> cache;
      ecov::squeeze_excite(x, sh.ratio, p, &cache);
      x.zero_grad();
      p.w1.zero_grad();
      p.b1.zero_grad();
      p.w2.zero_grad();
      p.b2.zero_grad();
      ecov::squeeze_excite_backward(x, p, cache, probe);
      require(ecov::grad_check(loss, grad_of(x), x).max_rel_err);
      require(ecov::grad_check(loss, grad_of(p.w1), p.w1).max_rel_err);
      require(ecov::grad_check(loss, grad_of(p.b1), p.b1).max_rel_err);
      require(ecov::grad_check(loss, grad_of(p.w2), p.w2).max_rel_err);
      require(ecov::grad_check(loss, grad_of(p.b2), p.b2).max_rel_err);
      if (!mutated) {
        TensorD gx = grad_of(x);
        mutation(mutated_rel_err(loss, gx, x));
        mutated = true;
      }
    }
  }

  { // global average pooling
    const std::vector<std::vector<int64_t>> shapes = {{1, 1, 2, 2}, {2, 3, 4, 4}, {3, 2, 5, 3}};
    bool mutated = false;
    for (const auto& sh : shapes) {
      TensorD x = rand_tensor(sh, rng);
      const TensorD probe = rand_tensor({sh[0], sh[1]}, rng);
      auto loss = [&]() { return project(ecov::global_avg_pool(x), probe); };
      x.zero_grad();
      ecov::global_avg_pool_backward(x, probe);
      TensorD gx = grad_of(x);
      require(ecov::grad_check(loss, gx, x).max_rel_err);
      if (!mutated) {
        mutation(mutated_rel_err(loss, gx, x));
        mutated = true;
      }
    }
  }

  { // fully connected
    struct Shape {
      int64_t n, cin, cout;
    };
    const Shape shapes[] = {{2, 3, 4}, {1, 5, 2}, {4, 4, 4}};
    bool mutated = false;
    for (const auto& sh : shapes) {
      TensorD x = rand_tensor({sh.n, sh.cin}, rng);
      TensorD w = rand_tensor({sh.cin, sh.cout}, rng, -0.5, 0.5);
      TensorD b = rand_tensor({sh.cout}, rng, -0.5, 0.5);
      const TensorD probe = rand_tensor({sh.n, sh.cout}, rng);
      auto loss = [&]() { return project(ecov::fully_connected(x, w, b), probe); };
      x.zero_grad();
      w.zero_grad();
      b.zero_grad();
      ecov::fully_connected_backward(x, w, b, probe);
      require(ecov::grad_check(loss, grad_of(x), x).max_rel_err);
      TensorD gw = grad_of(w);
      require(ecov::grad_check(loss, gw, w).max_rel_err);
      require(ecov::grad_check(loss, grad_of(b), b).max_rel_err);
      if (!mutated) {
        mutation(mutated_rel_err(loss, gw, w));
        mutated = true;
      }
    }
  }

  { // fused softmax cross entropy
    struct Shape {
      int64_t n, c;
    };
    const Shape shapes[] = {{2, 3}, {1, 4}, {3, 2}};
    bool mutated = false;
    for (const auto& sh : shapes) {
      TensorD logits = rand_tensor({sh.n, sh.c}, rng);
      TensorD onehot({sh.n, sh.c});
      std::vector<double> w(static_cast<size_t>(sh.c));
      for (auto& wv : w) wv = rng.uniform(0.5, 2.0);
      for (int64_t i = 0; i < sh.n; ++i) onehot.at(i, rng.below(static_cast<uint64_t>(sh.c))) = 1.0;
      auto loss = [&]() {
        auto probs = ecov::softmax(logits);
        return ecov::cross_entropy_loss(probs, onehot, w, 0.0, 0.0,
                                        std::span<const TensorD* const>{});
      };
      const TensorD analytic = ecov::softmax_ce_grad(ecov::softmax(logits), onehot, w);
      TensorD a = analytic;
      require(ecov::grad_check(loss, a, logits).max_rel_err);
      if (!mutated) {
        mutation(mutated_rel_err(loss, a, logits));
        mutated = true;
      }
    }
  }

  return s;
}

// ---- criterion 4 helpers ---------------------------------------------------

int oracle_hard(const std::vector<std::vector<double>>& rows, int m) {
  const int total = static_cast<int>(rows.size());
  const int classes = static_cast<int>(rows[0].size());
  std::vector<int> votes(static_cast<size_t>(classes), 0);
  for (int s = total - m; s < total; ++s) {
    int best = 0;
    for (int c = 1; c < classes; ++c)
      if (rows[static_cast<size_t>(s)][static_cast<size_t>(c)] >
          rows[static_cast<size_t>(s)][static_cast<size_t>(best)])
        best = c;
    ++votes[static_cast<size_t>(best)];
  }
  const int top = *std::max_element(votes.begin(), votes.end());
  std::vector<int> tied;
  for (int c = 0; c < classes; ++c)
    if (votes[static_cast<size_t>(c)] == top) tied.push_back(c);
  if (tied.size() == 1) return tied[0];
  int winner = tied[0];
  auto mean_of = [&](int c) {
    double acc = 0;
    for (int s = total - m; s < total; ++s) acc += rows[static_cast<size_t>(s)][static_cast<size_t>(c)];
    return acc / static_cast<double>(m);
  };
  double best_mean = mean_of(winner);
  for (size_t i = 1; i < tied.size(); ++i) {
    const double mu = mean_of(tied[i]);
    if (mu > best_mean) {
      best_mean = mu;
      winner = tied[i];
    }
  }
  return winner;
}

int oracle_soft(const std::vector<std::vector<double>>& rows, int m) {
  const int total = static_cast<int>(rows.size());
  const int classes = static_cast<int>(rows[0].size());
  int best = 0;
  double best_mean = -1.0;
  for (int c = 0; c < classes; ++c) {
    double acc = 0;
    for (int s = total - m; s < total; ++s) acc += rows[static_cast<size_t>(s)][static_cast<size_t>(c)];
    acc /= static_cast<double>(m);
    if (acc > best_mean) {
      best_mean = acc;
      best = c;
    }
  }
  return best;
}

std::vector<double> random_simplex(Rng& rng, int classes) {
  std::vector<double> row(static_cast<size_t>(classes));
  double total = 0;
  for (auto& v : row) {
    v = rng.uniform(1e-3, 1.0);
    total += v;
  }
  for (auto& v : row) v /= total;
  return row;
}

// ---- criterion 5 helper ----------------------------------------------------

double pair_count_auc(const std::vector<int>& truth, const std::vector<double>& scores) {
  double wins = 0;
  int64_t pairs = 0;
  for (size_t p = 0; p < truth.size(); ++p) {
    if (truth[p] != 1) continue;
    for (size_t n = 0; n < truth.size(); ++n) {
      if (truth[n] != 0) continue;
      ++pairs;
      if (scores[p] > scores[n])
        wins += 1.0;
      else if (scores[p] == scores[n])
        wins += 0.5;
    }
  }
  return wins / static_cast<double>(pairs);
}

// ---- criterion 7 helper ----------------------------------------------------

double two_filter_cam_mismatch() {
  ecov::ArchSpec spec;
  spec.name = "cam-toy";
  spec.resolution = 8;
  spec.num_classes = 3;
  spec.head_width = 4;
  spec.head_dropout = 0.0;
  spec.residual_dropout = 0.0;
  spec.stages = {
      {ecov::StageOp::kConv, 3, 2, 4, 1, 0, false},
      {ecov::StageOp::kConv, 1, 1, 2, 1, 0, false},
  };

  Rng img_rng(17);
  ecov::Tensor<double> image({3, 8, 8});
  for (int64_t i = 0; i < image.numel(); ++i) image[i] = img_rng.uniform(0.0, 1.0);

  ecov::Model<double> subject(spec, 314);
  const auto heat = ecov::compute_cam(subject, image, 1);

  ecov::Model<double> twin(spec, 314);
  ecov::Tensor<double> batch({1, 3, 8, 8});
  for (int64_t i = 0; i < image.numel(); ++i) batch[i] = image[i];
  Rng unused(0);
  const auto res = twin.forward(batch, Mode::kInference, unused);
  const auto act = twin.retained_activation(ecov::Model<double>::kTopActivation);

  ecov::Tensor<double> dlogits({1, 3});
  const double p1 = res.probs.at(0, 1);
  for (int j = 0; j < 3; ++j)
    dlogits.at(0, j) = p1 * ((j == 1 ? 1.0 : 0.0) - res.probs.at(0, j));
  twin.zero_grads();
  twin.backward(dlogits, true, true);
  const auto grads = twin.feature_grad();

  double w[2] = {0.0, 0.0};
  for (int f = 0; f < 2; ++f) {
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) w[f] += grads.at(0, f, i, j);
    w[f] /= 16.0;
  }

  double expected[16];
  double peak = 0.0;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) {
      const double pre = w[0] * act.at(0, 0, i, j) + w[1] * act.at(0, 1, i, j);
      const double v = pre > 0.0 ? pre : 0.0;
      expected[i * 4 + j] = v;
      peak = std::max(peak, v);
    }
  if (peak <= 0.0) throw ecov::NumericError("cam oracle degenerated to a zero map");

  double worst = 0.0;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      worst = std::max(worst, std::abs(heat.raw.at(i, j) - expected[i * 4 + j] / peak));
  return worst;
}

} // namespace

int main() {
  std::cout.setf(std::ios::fixed);
  std::cout.precision(4);
  int failures = 0;
  auto report = [&](int idx, const std::string& name, bool ok, const std::string& detail) {
    std::cout << (ok ? "PASS" : "FAIL") << "  " << idx << ". " << name;
    if (!detail.empty()) std::cout << ": " << detail;
    std::cout << std::endl;
    if (!ok) ++failures;
  };
  auto guarded = [&](int idx, const std::string& name,
                     const std::function<std::pair<bool, std::string>()>& body) {
    try {
      const auto [ok, detail] = body();
      report(idx, name, ok, detail);
    } catch (const std::exception& e) {
      report(idx, name, false, std::string("exception: ") + e.what());
    }
  };

  // 1. gradient correctness over the full layer stack
  guarded(1, "gradient checks across the layer stack", [] {
    const auto start = Clock::now();
    const GradSummary s = run_gradient_checks();
    const double elapsed = seconds_since(start);
    std::ostringstream detail;
    detail << s.checks << " checks, worst rel err " << std::scientific << s.worst
           << ", weakest mutation " << s.weakest_mutation << ", " << std::fixed << elapsed << "s";
    return std::make_pair(elapsed < 120.0, detail.str());
  });

  // 2. compound scaling and parameter budget
  guarded(2, "compound scaling reproduces the baseline table", [] {
    const ecov::ArchSpec base = ecov::b0_base();
    ecov::ScalingCoefficients defaults;
    bool ok = std::abs(defaults.alpha - 1.2) < 1e-12 && std::abs(defaults.beta - 1.1) < 1e-12 &&
              std::abs(defaults.gamma - 1.15) < 1e-12;
    const double product = defaults.constraint_product();
    ok = ok && std::abs(product - 1.9203) < 1e-4 && std::abs(product - 2.0) / 2.0 <= 0.10;

    const ecov::ArchSpec scaled = ecov::scale_arch(base, defaults); // phi = 0
    ok = ok && scaled.resolution == base.resolution && scaled.stages.size() == base.stages.size();
    for (size_t i = 0; ok && i < base.stages.size(); ++i) {
      const auto& a = base.stages[i];
      const auto& b = scaled.stages[i];
      ok = a.op == b.op && a.kernel == b.kernel && a.stride == b.stride &&
           a.channels == b.channels && a.repeats == b.repeats;
    }

    ecov::Model<ecov::real_t> b0(ecov::preset("b0"), 1);
    const int64_t count = b0.param_count();
    const double rel = std::abs(static_cast<double>(count) - 4978847.0) / 4978847.0;
    ok = ok && rel <= 0.05;
    std::ostringstream detail;
    detail << "product " << product << ", b0 params " << count << " (" << std::setprecision(2)
           << rel * 100.0 << "% from published)";
    return std::make_pair(ok, detail.str());
  });

  // 3. annealing schedule and snapshot count
  guarded(3, "cosine schedule matches its closed form", [] {
    ecov::TrainConfig cfg; // 25 epochs, 5 cycles, lr 1e-4
    bool ok = true;
    double worst_rel = 0.0;
    for (int t = 1; t <= cfg.total_epochs; ++t) {
      const double len = 5.0;
      const double pos = static_cast<double>((t - 1) % 5);
      const double expected = cfg.initial_lr / 2.0 * (std::cos(std::numbers::pi * pos / len) + 1.0);
      const double got = ecov::cosine_lr(t, cfg);
      const double rel = std::abs(got - expected) / expected;
      worst_rel = std::max(worst_rel, rel);
      if (rel > 1e-12) ok = false;
    }
    for (int t : {1, 6, 11, 16, 21})
      if (ecov::cosine_lr(t, cfg) != cfg.initial_lr) ok = false;

    std::vector<int> snaps;
    for (int t = 1; t <= cfg.total_epochs; ++t)
      if (ecov::is_snapshot_epoch(t, cfg)) snaps.push_back(t);
    ok = ok && snaps == std::vector<int>{5, 10, 15, 20, 25};

    std::ostringstream detail;
    detail << "worst rel " << std::scientific << worst_rel << ", " << snaps.size() << " snapshots";
    return std::make_pair(ok, detail.str());
  });

  // 4. ensemble equivalence against a brute-force oracle
  guarded(4, "ensembles match the brute-force oracle on 1000 sets", [] {
    Rng rng(555);
    int mismatches = 0;
    for (int trial = 0; trial < 1000; ++trial) {
      const int samples = 1 + static_cast<int>(rng.below(6));
      ecov::PredictionSet set;
      set.probs.resize(static_cast<size_t>(samples));
      for (auto& sample : set.probs) {
        sample.resize(5);
        for (auto& row : sample) row = random_simplex(rng, 3);
      }
      for (int m = 1; m <= 5; ++m) {
        set.m = m;
        const auto hard = ecov::hard_ensemble(set);
        const auto soft = ecov::soft_ensemble(set);
        for (int i = 0; i < samples; ++i) {
          if (hard[static_cast<size_t>(i)] != oracle_hard(set.probs[static_cast<size_t>(i)], m))
            ++mismatches;
          if (soft.labels[static_cast<size_t>(i)] != oracle_soft(set.probs[static_cast<size_t>(i)], m))
            ++mismatches;
        }
      }
    }

    // permutation invariance: reordering samples reorders labels in lockstep
    ecov::PredictionSet fwd;
    fwd.m = 3;
    for (int i = 0; i < 8; ++i) {
      std::vector<std::vector<double>> sample;
      for (int sidx = 0; sidx < 5; ++sidx) sample.push_back(random_simplex(rng, 3));
      fwd.probs.push_back(std::move(sample));
    }
    ecov::PredictionSet rev = fwd;
    std::reverse(rev.probs.begin(), rev.probs.end());
    auto fl = ecov::hard_ensemble(fwd);
    auto rl = ecov::hard_ensemble(rev);
    std::reverse(rl.begin(), rl.end());
    bool invariant = fl == rl;

    // idempotence: five copies of one distribution act like a single argmax
    ecov::PredictionSet flat;
    for (int i = 0; i < 4; ++i) {
      const auto row = random_simplex(rng, 3);
      flat.probs.push_back(std::vector<std::vector<double>>(5, row));
    }
    for (int m = 1; m <= 5 && invariant; ++m) {
      flat.m = m;
      const auto hard = ecov::hard_ensemble(flat);
      const auto soft = ecov::soft_ensemble(flat);
      for (size_t i = 0; i < flat.probs.size(); ++i) {
        int best = 0;
        for (int c = 1; c < 3; ++c)
          if (flat.probs[i][0][static_cast<size_t>(c)] > flat.probs[i][0][static_cast<size_t>(best)])
            best = c;
        if (hard[i] != best || soft.labels[i] != best) invariant = false;
      }
    }

    std::ostringstream detail;
    detail << mismatches << " mismatches, invariants " << (invariant ? "hold" : "violated");
    return std::make_pair(mismatches == 0 && invariant, detail.str());
  });

  // 5. metrics arithmetic against published rows
  guarded(5, "metric arithmetic reproduces the published values", [] {
    const auto row = ecov::prf1(100, 8, 0, 1471);
    bool ok = std::abs(row.precision - 92.59) <= 0.01 && std::abs(row.recall - 100.0) <= 0.01 &&
              std::abs(row.f1 - 96.15) <= 0.01;

    const auto big = ecov::accuracy_ci(1520, 1579);
    const auto small = ecov::accuracy_ci(289, 300);
    ok = ok && std::abs(big.halfwidth_percent - 0.94) <= 0.01 &&
         std::abs(small.halfwidth_percent - 2.13) <= 0.01;

    Rng rng(808);
    double worst = 0.0;
    for (int trial = 0; trial < 300; ++trial) {
      const int n = 6 + static_cast<int>(rng.below(40));
      std::vector<int> truth(static_cast<size_t>(n));
      std::vector<double> scores(static_cast<size_t>(n));
      int pos = 0;
      for (int i = 0; i < n; ++i) {
        truth[static_cast<size_t>(i)] = rng.bernoulli(0.45) ? 1 : 0;
        pos += truth[static_cast<size_t>(i)];
        scores[static_cast<size_t>(i)] = static_cast<double>(rng.below(10)) / 9.0;
      }
      if (pos == 0 || pos == n) continue;
      const auto roc = ecov::binary_roc(truth, scores);
      worst = std::max(worst, std::abs(roc.auc - pair_count_auc(truth, scores)));
    }
    ok = ok && worst <= 1e-9;

    std::ostringstream detail;
    detail << "prf1 " << row.precision << "/" << row.recall << "/" << row.f1 << ", ci "
           << big.halfwidth_percent << "/" << small.halfwidth_percent << ", auc gap "
           << std::scientific << worst;
    return std::make_pair(ok, detail.str());
  });

  // shared artifacts for criteria 6 through 8
  const std::string work = (fs::temp_directory_path() / "ecov_acceptance").string();
  fs::remove_all(work);
  fs::create_directories(work);

  ecov::TrainOptions train_opt;
  train_opt.manifest_path = work + "/train.csv";
  train_opt.out_dir = work + "/run_a";
  train_opt.arch = "micro";

  double soft_accuracy = -1.0;
  bool run_a_trained = false;

  // 6. end-to-end snapshot-ensemble run on the synthetic set
  guarded(6, "toy training run clears the ensemble bar", [&] {
    const auto start = Clock::now();
    ecov::generate_toy_dataset(work, 50, 48, 7);

    ecov::Model<ecov::real_t> probe(ecov::preset("micro"), 1);
    const int64_t params = probe.param_count();
    if (params > 200000)
      return std::make_pair(false, "micro model has " + std::to_string(params) + " parameters");

    std::ostringstream sink;
    ecov::run_train(train_opt, sink);
    run_a_trained = true;

    const auto test_manifest = ecov::load_manifest(work + "/test.csv", ecov::default_class_names());
    const auto test_data = ecov::load_labeled_data<ecov::real_t>(test_manifest, 48);
    const auto run = ecov::open_run(train_opt.out_dir);
    const auto pset = ecov::collect_predictions(run, test_data, 0);

    const auto soft = ecov::soft_ensemble(pset);
    int64_t correct = 0;
    for (size_t i = 0; i < soft.labels.size(); ++i)
      if (soft.labels[i] == test_data.labels[i]) ++correct;
    soft_accuracy = static_cast<double>(correct) / static_cast<double>(soft.labels.size());

    const int n_snapshots = pset.snapshots();
    double mean_single = 0.0;
    for (int s = 0; s < n_snapshots; ++s) {
      int64_t single = 0;
      for (size_t i = 0; i < pset.probs.size(); ++i) {
        int best = 0;
        for (int c = 1; c < 3; ++c)
          if (pset.probs[i][static_cast<size_t>(s)][static_cast<size_t>(c)] >
              pset.probs[i][static_cast<size_t>(s)][static_cast<size_t>(best)])
            best = c;
        if (best == test_data.labels[i]) ++single;
      }
      mean_single += static_cast<double>(single) / static_cast<double>(pset.probs.size());
    }
    mean_single /= static_cast<double>(n_snapshots);

    const double elapsed = seconds_since(start);
    const bool ok = soft_accuracy >= 0.95 && soft_accuracy >= mean_single - 0.01 &&
                    elapsed <= 600.0 && n_snapshots == 5;
    std::ostringstream detail;
    detail << "params " << params << ", soft acc " << soft_accuracy << ", mean single "
           << mean_single << ", " << elapsed << "s";
    return std::make_pair(ok, detail.str());
  });

  // 7. saliency maps: arithmetic oracle plus localization on the toy blobs
  guarded(7, "saliency maps are exact and localize the planted blob", [&] {
    const double mismatch = two_filter_cam_mismatch();
    bool ok = mismatch <= 1e-10;

    if (!run_a_trained) return std::make_pair(false, std::string("no trained run available"));
    const auto run = ecov::open_run(train_opt.out_dir);
    ecov::Model<ecov::real_t> model(run.spec, 0);
    ecov::load_snapshot_into(model, run.snapshot_paths.back());

    const auto manifest = ecov::load_manifest(work + "/test.csv", ecov::default_class_names());
    const auto data = ecov::load_labeled_data<ecov::real_t>(manifest, run.spec.resolution);

    Rng unused(0);
    int used = 0;
    double mass_sum = 0.0;
    bool nonneg = true;
    for (size_t i = 0; i < data.images.size() && used < 30; ++i) {
      if (data.labels[i] != 0) continue;
      const auto& img = data.images[i];
      ecov::Tensor<ecov::real_t> batch({1, img.dim(0), img.dim(1), img.dim(2)});
      for (int64_t j = 0; j < img.numel(); ++j) batch[j] = img[j];
      const auto res = model.forward(batch, Mode::kInference, unused);
      int best = 0;
      for (int c = 1; c < 3; ++c)
        if (res.probs.at(0, c) > res.probs.at(0, best)) best = c;
      if (best != 0) continue;

      const auto heat = ecov::compute_cam(model, img, 0);
      for (int64_t j = 0; j < heat.raw.numel(); ++j)
        if (heat.raw[j] < 0) nonneg = false;
      mass_sum += ecov::quadrant_mass(heat.upsampled, 0);
      ++used;
    }
    const double mean_mass = used > 0 ? mass_sum / used : 0.0;
    ok = ok && used >= 20 && mean_mass >= 0.5 && nonneg;
    std::ostringstream detail;
    detail << "oracle gap " << std::scientific << mismatch << std::fixed << ", " << used
           << " samples, mean planted-quadrant mass " << mean_mass;
    return std::make_pair(ok, detail.str());
  });

  // 8. determinism and serialization exactness
  guarded(8, "identical seeds give bit-identical runs", [&] {
    if (!run_a_trained) return std::make_pair(false, std::string("no trained run available"));
    ecov::TrainOptions second = train_opt;
    second.out_dir = work + "/run_b";
    std::ostringstream sink;
    ecov::run_train(second, sink);

    const auto run_a = ecov::open_run(train_opt.out_dir);
    const auto run_b = ecov::open_run(second.out_dir);
    bool ok = run_a.snapshot_paths.size() == run_b.snapshot_paths.size();
    for (size_t i = 0; ok && i < run_a.snapshot_paths.size(); ++i)
      ok = slurp(run_a.snapshot_paths[i]) == slurp(run_b.snapshot_paths[i]);
    const bool snapshots_identical = ok;

    ecov::EvalOptions eval_a{train_opt.out_dir, work + "/test.csv", ecov::EnsembleMode::kSoft, 0, ""};
    ecov::EvalOptions eval_b{second.out_dir, work + "/test.csv", ecov::EnsembleMode::kSoft, 0, ""};
    std::ostringstream rep_a, rep_b;
    ecov::run_eval(eval_a, rep_a);
    ecov::run_eval(eval_b, rep_b);
    const bool reports_identical = rep_a.str() == rep_b.str() && !rep_a.str().empty();
    ok = ok && reports_identical;

    const auto tensors = ecov::load_snapshot<ecov::real_t>(run_a.snapshot_paths.front());
    const std::string copy = work + "/roundtrip.ecov";
    ecov::save_snapshot(tensors, copy);
    const bool roundtrip_exact = slurp(copy) == slurp(run_a.snapshot_paths.front());
    ok = ok && roundtrip_exact;

    std::ostringstream detail;
    detail << "snapshots " << (snapshots_identical ? "identical" : "differ") << ", reports "
           << (reports_identical ? "identical" : "differ") << ", round-trip "
           << (roundtrip_exact ? "exact" : "inexact");
    return std::make_pair(ok, detail.str());
  });

  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed")
            << std::endl;
  return failures;
}

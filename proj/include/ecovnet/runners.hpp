#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "ecovnet/dataset.hpp"
#include "ecovnet/ensemble.hpp"
#include "ecovnet/metrics.hpp"
#include "ecovnet/model.hpp"
#include "ecovnet/trainer.hpp"

// Command implementations shared by the command-line tool and the language
// bindings. These run on 32-bit elements; the wider 64-bit path exists for
// gradient verification in the test suite.

namespace ecov {

using real_t = float;

struct ArchOptions {
  std::string preset = "b0"; // b0..b5 or micro; ignored when phi >= 0
  double phi = -1.0;
  double alpha = 1.2, beta = 1.1, gamma = 1.15;
};

void run_arch(const ArchOptions& opt, std::ostream& out);

struct GenToyOptions {
  std::string out_dir;
  int n_per_class = 50;
  int64_t size = 48;
  uint64_t seed = 7;
};

void run_gen_toy(const GenToyOptions& opt, std::ostream& out);

struct TrainOptions {
  std::string manifest_path;
  std::string out_dir;
  std::string arch = "micro";
  std::vector<std::string> class_names; // empty = covid19/normal/pneumonia
  double val_fraction = 0.1;
  TrainConfig config;
};

void run_train(const TrainOptions& opt, std::ostream& out);

// Snapshot paths, architecture, and class names recorded by a training run.
struct RunDir {
  std::string dir;
  ArchSpec spec;
  std::vector<std::string> class_names;
  std::vector<std::string> snapshot_paths;
  TrainConfig config;
};

RunDir open_run(const std::string& dir);

enum class EnsembleMode { kNone, kHard, kSoft };

EnsembleMode parse_ensemble_mode(const std::string& name);
const char* ensemble_mode_name(EnsembleMode mode);

struct EvalOptions {
  std::string run_dir;
  std::string manifest_path;
  EnsembleMode mode = EnsembleMode::kSoft;
  int m = 0; // 0 = all snapshots
  std::string roc_out_dir; // empty = skip ROC point files
};

void run_eval(const EvalOptions& opt, std::ostream& out);

struct PredictOptions {
  std::string run_dir;
  std::string manifest_path;
  EnsembleMode mode = EnsembleMode::kSoft;
  int m = 0;
};

void run_predict(const PredictOptions& opt, std::ostream& out);

struct ExplainOptions {
  std::string run_dir;
  std::string manifest_path;
  std::string out_dir;
  int target_class = -1; // -1 = each snapshot's own predicted class
  int limit = 0;         // 0 = all manifest images
  int snapshot = 0;      // 0 = every snapshot, else 1-based index
};

std::vector<std::string> run_explain(const ExplainOptions& opt, std::ostream& out);

// Per-sample, per-snapshot softmax outputs for a whole split.
PredictionSet collect_predictions(const RunDir& run, const LabeledData<real_t>& data, int m);

} // namespace ecov

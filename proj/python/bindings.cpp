#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "ecovnet/arch.hpp"
#include "ecovnet/ensemble.hpp"
#include "ecovnet/errors.hpp"
#include "ecovnet/runners.hpp"
#include "ecovnet/trainer.hpp"

namespace py = pybind11;
using namespace pybind11::literals;

namespace {

ecov::EnsembleMode mode_from_string(const std::string& name) {
  return ecov::parse_ensemble_mode(name);
}

} // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "compound-scaled convolutional classifier with snapshot ensembles";

  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ecov::ArgumentError& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    } catch (const ecov::NumericError& e) {
      PyErr_SetString(PyExc_ArithmeticError, e.what());
    } catch (const ecov::DataError& e) {
      PyErr_SetString(PyExc_RuntimeError, e.what());
    }
  });

  m.def(
      "arch_table",
      [](const std::string& preset, double phi, double alpha, double beta, double gamma) {
        ecov::ArchOptions opt;
        opt.preset = preset;
        opt.phi = phi;
        opt.alpha = alpha;
        opt.beta = beta;
        opt.gamma = gamma;
        std::ostringstream out;
        ecov::run_arch(opt, out);
        return out.str();
      },
      "preset"_a = "b0", "phi"_a = -1.0, "alpha"_a = 1.2, "beta"_a = 1.1, "gamma"_a = 1.15,
      "Stage table for a named preset, or for the base table scaled by phi.");

  m.def(
      "gen_toy",
      [](const std::string& out_dir, int n_per_class, int size, std::uint64_t seed) {
        ecov::GenToyOptions opt;
        opt.out_dir = out_dir;
        opt.n_per_class = n_per_class;
        opt.size = size;
        opt.seed = seed;
        std::ostringstream out;
        ecov::run_gen_toy(opt, out);
        return out.str();
      },
      "out_dir"_a, "n_per_class"_a = 50, "size"_a = 48, "seed"_a = 7,
      "Write the synthetic three-class dataset; returns the manifest paths, one per line.");

  m.def(
      "train",
      [](const std::string& manifest, const std::string& out_dir, const std::string& arch,
         std::vector<std::string> classes, double val_fraction, int epochs, int batch_size,
         double lr, int cycles, std::uint64_t seed, bool augment, bool inverse_class_weights) {
        ecov::TrainOptions opt;
        opt.manifest_path = manifest;
        opt.out_dir = out_dir;
        opt.arch = arch;
        opt.class_names = std::move(classes);
        opt.val_fraction = val_fraction;
        opt.config.total_epochs = epochs;
        opt.config.batch_size = batch_size;
        opt.config.initial_lr = lr;
        opt.config.cycles = cycles;
        opt.config.seed = seed;
        opt.config.augment = augment;
        opt.config.weight_mode = inverse_class_weights ? ecov::ClassWeightMode::kInverseFrequency
                                                       : ecov::ClassWeightMode::kNone;
        std::ostringstream out;
        ecov::run_train(opt, out);
        return out.str();
      },
      "manifest"_a, "out_dir"_a, "arch"_a = "micro", "classes"_a = std::vector<std::string>{},
      "val_fraction"_a = 0.1, "epochs"_a = 25, "batch_size"_a = 8, "lr"_a = 1e-4, "cycles"_a = 5,
      "seed"_a = 1, "augment"_a = true, "inverse_class_weights"_a = true,
      "Train on a manifest and write snapshots plus the run record into out_dir; returns the log.");

  m.def(
      "evaluate",
      [](const std::string& run_dir, const std::string& manifest, const std::string& mode, int m_last,
         const std::string& roc_out_dir) {
        ecov::EvalOptions opt;
        opt.run_dir = run_dir;
        opt.manifest_path = manifest;
        opt.mode = mode_from_string(mode);
        opt.m = m_last;
        opt.roc_out_dir = roc_out_dir;
        std::ostringstream out;
        ecov::run_eval(opt, out);
        return out.str();
      },
      "run_dir"_a, "manifest"_a, "mode"_a = "soft", "m"_a = 0, "roc_out_dir"_a = "",
      "Score a manifest against a run; returns the report as CSV text.");

  m.def(
      "predict",
      [](const std::string& run_dir, const std::string& manifest, const std::string& mode, int m_last) {
        ecov::PredictOptions opt;
        opt.run_dir = run_dir;
        opt.manifest_path = manifest;
        opt.mode = mode_from_string(mode);
        opt.m = m_last;
        std::ostringstream out;
        ecov::run_predict(opt, out);
        return out.str();
      },
      "run_dir"_a, "manifest"_a, "mode"_a = "soft", "m"_a = 0,
      "Per-sample probabilities and predicted labels as CSV text.");

  m.def(
      "explain",
      [](const std::string& run_dir, const std::string& manifest, const std::string& out_dir,
         int target_class, int limit, int snapshot) {
        ecov::ExplainOptions opt;
        opt.run_dir = run_dir;
        opt.manifest_path = manifest;
        opt.out_dir = out_dir;
        opt.target_class = target_class;
        opt.limit = limit;
        opt.snapshot = snapshot;
        std::ostringstream out;
        return ecov::run_explain(opt, out);
      },
      "run_dir"_a, "manifest"_a, "out_dir"_a, "target_class"_a = -1, "limit"_a = 0, "snapshot"_a = 0,
      "Write saliency overlays; returns the list of files produced.");

  m.def(
      "cosine_lr",
      [](int epoch, int total_epochs, int cycles, double initial_lr) {
        ecov::TrainConfig cfg;
        cfg.total_epochs = total_epochs;
        cfg.cycles = cycles;
        cfg.initial_lr = initial_lr;
        return ecov::cosine_lr(epoch, cfg);
      },
      "epoch"_a, "total_epochs"_a = 25, "cycles"_a = 5, "initial_lr"_a = 1e-4,
      "Annealed learning rate for a 1-based epoch index.");

  m.def("class_weights", &ecov::class_weights, "counts"_a,
        "Inverse-frequency class weights for the given per-class sample counts.");

  m.def(
      "ensemble_labels",
      [](const std::vector<std::vector<std::vector<double>>>& probs, int m_last,
         const std::string& mode) {
        ecov::PredictionSet set;
        set.probs = probs;
        set.m = m_last;
        if (mode == "hard") return ecov::hard_ensemble(set);
        if (mode == "soft") return ecov::soft_ensemble(set).labels;
        throw ecov::ArgumentError("ensemble_labels: mode must be 'hard' or 'soft', got '" + mode +
                                  "'");
      },
      "probs"_a, "m"_a, "mode"_a = "soft",
      "Combine per-snapshot probability vectors (sample x snapshot x class) into labels.");
}

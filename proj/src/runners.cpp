#include "ecovnet/runners.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "ecovnet/config.hpp"
#include "ecovnet/gradcam.hpp"
#include "ecovnet/snapshot_io.hpp"

namespace fs = std::filesystem;

namespace ecov {

namespace {

std::vector<std::string> split_csv_list(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    const size_t a = item.find_first_not_of(" \t");
    const size_t b = item.find_last_not_of(" \t");
    if (a != std::string::npos) out.push_back(item.substr(a, b - a + 1));
  }
  return out;
}

std::string join_csv_list(const std::vector<std::string>& items) {
  std::string out;
  for (size_t i = 0; i < items.size(); ++i) {
    if (i) out += ',';
    out += items[i];
  }
  return out;
}

ArchSpec spec_for(const std::string& name, int num_classes) {
  ArchSpec spec = preset(name);
  spec.num_classes = num_classes;
  return spec;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create directory '" + dir + "': " + ec.message());
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw DataError("short write to '" + path + "'");
}

int resolve_m(int requested, int available) {
  if (requested == 0) return available;
  if (requested < 1 || requested > available)
    throw ArgumentError("m must be between 1 and the snapshot count " + std::to_string(available));
  return requested;
}

Tensor<real_t> gray_plane(const Tensor<real_t>& image3) {
  Tensor<real_t> gray({image3.dim(1), image3.dim(2)});
  for (int64_t i = 0; i < gray.numel(); ++i) gray[i] = image3[i];
  return gray;
}

} // namespace

void run_arch(const ArchOptions& opt, std::ostream& out) {
  ArchSpec spec;
  if (opt.phi >= 0.0) {
    ScalingCoefficients coeffs{opt.alpha, opt.beta, opt.gamma, opt.phi};
    spec = scale_arch(b0_base(), coeffs);
    std::ostringstream name;
    name << "b0 scaled by phi=" << opt.phi;
    spec.name = name.str();
    out << "multipliers: depth " << std::pow(coeffs.alpha, coeffs.phi) << "  width "
        << std::pow(coeffs.beta, coeffs.phi) << "  resolution " << std::pow(coeffs.gamma, coeffs.phi)
        << "  constraint product " << coeffs.constraint_product() << "\n";
  } else {
    spec = preset(opt.preset);
  }
  out << format_stage_table(spec);
}

void run_gen_toy(const GenToyOptions& opt, std::ostream& out) {
  if (opt.out_dir.empty()) throw ArgumentError("gen-toy: output directory is required");
  generate_toy_dataset(opt.out_dir, opt.n_per_class, opt.size, opt.seed);
  out << (fs::path(opt.out_dir) / "train.csv").string() << "\n"
      << (fs::path(opt.out_dir) / "test.csv").string() << "\n";
}

void run_train(const TrainOptions& opt, std::ostream& out) {
  if (opt.manifest_path.empty()) throw ArgumentError("train: manifest path is required");
  if (opt.out_dir.empty()) throw ArgumentError("train: output directory is required");
  opt.config.validate();

  const std::vector<std::string> classes =
      opt.class_names.empty() ? default_class_names() : opt.class_names;

  ArchSpec spec = spec_for(opt.arch, static_cast<int>(classes.size()));
  Manifest full = load_manifest(opt.manifest_path, classes);
  auto [train_manifest, val_manifest] = split_dataset(full, opt.val_fraction, opt.config.seed);

  out << "loaded " << full.entries.size() << " samples; train " << train_manifest.entries.size()
      << ", val " << val_manifest.entries.size() << "\n";

  LabeledData<real_t> train_data = load_labeled_data<real_t>(train_manifest, spec.resolution);
  LabeledData<real_t> val_data = load_labeled_data<real_t>(val_manifest, spec.resolution);

  Model<real_t> model(spec, opt.config.seed);
  out << "model '" << spec.name << "': " << model.param_count() << " trainable parameters, "
      << model.state_count() << " normalization statistics\n";

  ensure_dir(opt.out_dir);
  std::ostringstream log;
  SnapshotBundle<real_t> bundle = train_with_snapshots(model, train_data, val_data, opt.config, &log);

  write_text((fs::path(opt.out_dir) / "training_log.csv").string(), log.str());
  out << log.str();

  std::vector<std::string> snapshot_names;
  for (const auto& snap : bundle.snapshots) {
    std::ostringstream name;
    name << "snapshot_" << snap.cycle << ".ecov";
    snapshot_names.push_back(name.str());
    save_snapshot(snap.tensors, (fs::path(opt.out_dir) / name.str()).string());
    out << "snapshot " << snap.cycle << ": train_loss " << snap.train_loss << ", val_acc "
        << snap.val_acc << "\n";
  }

  std::ostringstream cfg;
  cfg << "# training run record\n";
  cfg << "arch=" << opt.arch << "\n";
  cfg << "classes=" << join_csv_list(classes) << "\n";
  cfg << "resolution=" << spec.resolution << "\n";
  cfg << "snapshots=" << join_csv_list(snapshot_names) << "\n";
  cfg << "epochs=" << opt.config.total_epochs << "\n";
  cfg << "batch_size=" << opt.config.batch_size << "\n";
  cfg << "initial_lr=" << std::setprecision(17) << opt.config.initial_lr << "\n";
  cfg << "cycles=" << opt.config.cycles << "\n";
  cfg << "seed=" << opt.config.seed << "\n";
  cfg << "class_weights=" << (opt.config.weight_mode == ClassWeightMode::kInverseFrequency ? "inverse" : "none")
      << "\n";
  cfg << "augment=" << (opt.config.augment ? 1 : 0) << "\n";
  write_text((fs::path(opt.out_dir) / "run.cfg").string(), cfg.str());
}

RunDir open_run(const std::string& dir) {
  const std::string cfg_path = (fs::path(dir) / "run.cfg").string();
  KvConfig cfg = KvConfig::from_file(cfg_path);

  RunDir run;
  run.dir = dir;
  run.class_names = split_csv_list(cfg.get_string("classes", join_csv_list(default_class_names())));
  if (run.class_names.empty()) throw DataError("run record '" + cfg_path + "' lists no classes");
  run.spec = spec_for(cfg.get_string("arch", "micro"), static_cast<int>(run.class_names.size()));

  for (const auto& name : split_csv_list(cfg.get_string("snapshots", ""))) {
    const std::string path = (fs::path(dir) / name).string();
    if (!fs::exists(path)) throw DataError("run snapshot '" + path + "' is missing");
    run.snapshot_paths.push_back(path);
  }
  if (run.snapshot_paths.empty())
    throw DataError("run record '" + cfg_path + "' lists no snapshots");

  run.config.total_epochs = static_cast<int>(cfg.get_int("epochs", run.config.total_epochs));
  run.config.batch_size = static_cast<int>(cfg.get_int("batch_size", run.config.batch_size));
  run.config.initial_lr = cfg.get_double("initial_lr", run.config.initial_lr);
  run.config.cycles = static_cast<int>(cfg.get_int("cycles", run.config.cycles));
  run.config.seed = cfg.get_u64("seed", run.config.seed);
  return run;
}

EnsembleMode parse_ensemble_mode(const std::string& name) {
  if (name == "none") return EnsembleMode::kNone;
  if (name == "hard") return EnsembleMode::kHard;
  if (name == "soft") return EnsembleMode::kSoft;
  throw ArgumentError("unknown ensemble mode '" + name + "' (expected none, hard, or soft)");
}

const char* ensemble_mode_name(EnsembleMode mode) {
  switch (mode) {
    case EnsembleMode::kNone: return "none";
    case EnsembleMode::kHard: return "hard";
    case EnsembleMode::kSoft: return "soft";
  }
  return "?";
}

PredictionSet collect_predictions(const RunDir& run, const LabeledData<real_t>& data, int m) {
  const int n_snapshots = static_cast<int>(run.snapshot_paths.size());
  const int used_m = resolve_m(m, n_snapshots);
  const int64_t n = static_cast<int64_t>(data.images.size());
  if (n == 0) throw ArgumentError("collect_predictions: empty dataset");

  PredictionSet pset;
  pset.m = used_m;
  pset.probs.assign(static_cast<size_t>(n), {});

  Model<real_t> model(run.spec, 0);
  Rng unused(0);
  const int batch_size = std::max(1, run.config.batch_size);

  for (const auto& path : run.snapshot_paths) {
    load_snapshot_into(model, path);
    for (int64_t from = 0; from < n; from += batch_size) {
      const int64_t count = std::min<int64_t>(batch_size, n - from);
      const auto& first = data.images[static_cast<size_t>(from)];
      Tensor<real_t> batch({count, first.dim(0), first.dim(1), first.dim(2)});
      const int64_t plane = first.numel();
      for (int64_t b = 0; b < count; ++b) {
        const auto& img = data.images[static_cast<size_t>(from + b)];
        for (int64_t i = 0; i < plane; ++i) batch[b * plane + i] = img[i];
      }
      auto res = model.forward(batch, Mode::kInference, unused);
      for (int64_t b = 0; b < count; ++b) {
        std::vector<double> row(static_cast<size_t>(run.spec.num_classes));
        for (int c = 0; c < run.spec.num_classes; ++c)
          row[static_cast<size_t>(c)] = static_cast<double>(res.probs.at(b, c));
        pset.probs[static_cast<size_t>(from + b)].push_back(std::move(row));
      }
    }
  }
  return pset;
}

namespace {

struct Predictions {
  std::vector<int> labels;
  std::vector<std::vector<double>> probs; // what gets reported per sample
};

Predictions predictions_for_mode(const PredictionSet& pset, EnsembleMode mode) {
  Predictions out;
  switch (mode) {
    case EnsembleMode::kNone: {
      // single-model path: the last snapshot stands alone
      PredictionSet last = pset;
      last.m = 1;
      auto soft = soft_ensemble(last);
      out.labels = std::move(soft.labels);
      out.probs = std::move(soft.mean_probs);
      break;
    }
    case EnsembleMode::kHard: {
      out.labels = hard_ensemble(pset);
      out.probs = soft_ensemble(pset).mean_probs; // scores still come from averaging
      break;
    }
    case EnsembleMode::kSoft: {
      auto soft = soft_ensemble(pset);
      out.labels = std::move(soft.labels);
      out.probs = std::move(soft.mean_probs);
      break;
    }
  }
  return out;
}

} // namespace

void run_eval(const EvalOptions& opt, std::ostream& out) {
  RunDir run = open_run(opt.run_dir);
  Manifest manifest = load_manifest(opt.manifest_path, run.class_names);
  LabeledData<real_t> data = load_labeled_data<real_t>(manifest, run.spec.resolution);

  PredictionSet pset = collect_predictions(run, data, opt.m);
  Predictions pred = predictions_for_mode(pset, opt.mode);

  EvaluationReport report =
      evaluate(data.labels, pred.labels, pred.probs, run.spec.num_classes);

  out << "ensemble," << ensemble_mode_name(opt.mode) << "\nsnapshots_used,"
      << (opt.mode == EnsembleMode::kNone ? 1 : pset.m) << "\n\n";
  out << format_report_csv(report, run.class_names);

  if (!opt.roc_out_dir.empty()) {
    ensure_dir(opt.roc_out_dir);
    for (int c = 0; c < report.num_classes; ++c) {
      const auto& curve = report.roc_per_class[static_cast<size_t>(c)];
      write_text((fs::path(opt.roc_out_dir) / ("roc_" + run.class_names[static_cast<size_t>(c)] + ".csv"))
                     .string(),
                 format_roc_points_csv(curve));
    }
    write_text((fs::path(opt.roc_out_dir) / "roc_micro.csv").string(),
               format_roc_points_csv(report.roc_micro));
    write_text((fs::path(opt.roc_out_dir) / "roc_macro.csv").string(),
               format_roc_points_csv(report.roc_macro));
  }
}

void run_predict(const PredictOptions& opt, std::ostream& out) {
  RunDir run = open_run(opt.run_dir);
  Manifest manifest = load_manifest(opt.manifest_path, run.class_names);
  LabeledData<real_t> data = load_labeled_data<real_t>(manifest, run.spec.resolution);

  PredictionSet pset = collect_predictions(run, data, opt.m);
  Predictions pred = predictions_for_mode(pset, opt.mode);

  out << "path,pred_label";
  for (int c = 0; c < run.spec.num_classes; ++c) out << ",p" << c;
  out << ",mode\n";
  out << std::setprecision(6) << std::fixed;
  for (size_t i = 0; i < data.paths.size(); ++i) {
    out << data.paths[i] << ',' << run.class_names[static_cast<size_t>(pred.labels[i])];
    for (int c = 0; c < run.spec.num_classes; ++c) out << ',' << pred.probs[i][static_cast<size_t>(c)];
    out << ',' << ensemble_mode_name(opt.mode) << '\n';
  }
}

std::vector<std::string> run_explain(const ExplainOptions& opt, std::ostream& out) {
  RunDir run = open_run(opt.run_dir);
  if (opt.target_class >= run.spec.num_classes)
    throw ArgumentError("explain: class " + std::to_string(opt.target_class) + " outside [0," +
                        std::to_string(run.spec.num_classes) + ")");
  Manifest manifest = load_manifest(opt.manifest_path, run.class_names);
  LabeledData<real_t> data = load_labeled_data<real_t>(manifest, run.spec.resolution);
  ensure_dir(opt.out_dir);

  const int64_t limit = opt.limit > 0
                            ? std::min<int64_t>(opt.limit, static_cast<int64_t>(data.images.size()))
                            : static_cast<int64_t>(data.images.size());
  const int n_snapshots = static_cast<int>(run.snapshot_paths.size());
  if (opt.snapshot < 0 || opt.snapshot > n_snapshots)
    throw ArgumentError("explain: snapshot index must be 1.." + std::to_string(n_snapshots));

  Model<real_t> model(run.spec, 0);
  Rng unused(0);
  std::vector<std::string> written;

  for (int s = 1; s <= n_snapshots; ++s) {
    if (opt.snapshot != 0 && s != opt.snapshot) continue;
    load_snapshot_into(model, run.snapshot_paths[static_cast<size_t>(s - 1)]);
    for (int64_t i = 0; i < limit; ++i) {
      const Tensor<real_t>& image = data.images[static_cast<size_t>(i)];
      int target = opt.target_class;
      if (target < 0) {
        Tensor<real_t> batch({1, image.dim(0), image.dim(1), image.dim(2)});
        for (int64_t j = 0; j < image.numel(); ++j) batch[j] = image[j];
        auto res = model.forward(batch, Mode::kInference, unused);
        target = 0;
        for (int c = 1; c < run.spec.num_classes; ++c)
          if (res.probs.at(0, c) > res.probs.at(0, target)) target = c;
      }
      HeatMap<real_t> heat = compute_cam(model, image, target, Model<real_t>::kTopActivation, s);
      const Tensor<real_t> gray = gray_plane(image);
      const auto rgb = render_overlay(heat.upsampled, gray);

      const std::string stem = fs::path(data.paths[static_cast<size_t>(i)]).stem().string();
      std::ostringstream name;
      name << stem << "_s" << s << "_c" << target << ".png";
      const std::string out_path = (fs::path(opt.out_dir) / name.str()).string();
      write_png_rgb(out_path, gray.dim(0), gray.dim(1), rgb);
      written.push_back(out_path);
      out << out_path << "\n";
    }
  }
  return written;
}

} // namespace ecov

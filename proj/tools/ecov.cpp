#include <CLI11.hpp>

#include <iostream>
#include <string>

#include "ecovnet/config.hpp"
#include "ecovnet/errors.hpp"
#include "ecovnet/runners.hpp"

namespace {

// exit codes: 0 ok, 1 usage, 2 data, 3 numeric
constexpr int kUsageError = 1;
constexpr int kDataError = 2;
constexpr int kNumericError = 3;

std::vector<std::string> parse_class_list(const std::string& csv) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(csv);
  while (std::getline(in, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"compound-scaled convolutional classifier with snapshot ensembles"};
  app.require_subcommand(1);

  ecov::ArchOptions arch_opt;
  auto* arch_cmd = app.add_subcommand("arch", "print the stage table for a preset or scaling exponent");
  arch_cmd->add_option("--preset", arch_opt.preset, "b0..b5 or micro")->capture_default_str();
  arch_cmd->add_option("--phi", arch_opt.phi, "compound exponent applied to the b0 table");
  arch_cmd->add_option("--alpha", arch_opt.alpha, "depth base")->capture_default_str();
  arch_cmd->add_option("--beta", arch_opt.beta, "width base")->capture_default_str();
  arch_cmd->add_option("--gamma", arch_opt.gamma, "resolution base")->capture_default_str();

  ecov::GenToyOptions toy_opt;
  auto* toy_cmd = app.add_subcommand("gen-toy", "write the synthetic three-class dataset");
  toy_cmd->add_option("--out", toy_opt.out_dir, "output directory")->required();
  toy_cmd->add_option("--n", toy_opt.n_per_class, "images per class per split")->capture_default_str();
  toy_cmd->add_option("--size", toy_opt.size, "image edge length")->capture_default_str();
  toy_cmd->add_option("--seed", toy_opt.seed, "generator seed")->capture_default_str();

  ecov::TrainOptions train_opt;
  std::string train_classes, train_config_path, train_weights = "inverse";
  bool no_augment = false;
  auto* train_cmd = app.add_subcommand("train", "train with cosine-annealed cycles and save snapshots");
  train_cmd->add_option("--manifest", train_opt.manifest_path, "training manifest CSV")->required();
  train_cmd->add_option("--out", train_opt.out_dir, "run output directory")->required();
  train_cmd->add_option("--arch", train_opt.arch, "architecture preset")->capture_default_str();
  train_cmd->add_option("--classes", train_classes, "comma-separated class names");
  train_cmd->add_option("--val-fraction", train_opt.val_fraction, "validation share per class")
      ->capture_default_str();
  train_cmd->add_option("--epochs", train_opt.config.total_epochs, "total epochs")->capture_default_str();
  train_cmd->add_option("--batch-size", train_opt.config.batch_size, "minibatch size")
      ->capture_default_str();
  train_cmd->add_option("--lr", train_opt.config.initial_lr, "initial learning rate")
      ->capture_default_str();
  train_cmd->add_option("--cycles", train_opt.config.cycles, "annealing cycles / snapshots")
      ->capture_default_str();
  train_cmd->add_option("--seed", train_opt.config.seed, "run seed")->capture_default_str();
  train_cmd->add_option("--class-weights", train_weights, "none or inverse")->capture_default_str();
  train_cmd->add_flag("--no-augment", no_augment, "disable training-time augmentation");
  train_cmd->add_option("--rotation", train_opt.config.ranges.rotation_deg, "rotation range, degrees")
      ->capture_default_str();
  train_cmd->add_option("--shear", train_opt.config.ranges.shear_deg, "shear range, degrees")
      ->capture_default_str();
  train_cmd->add_option("--zoom-lo", train_opt.config.ranges.zoom_lo, "zoom lower bound")
      ->capture_default_str();
  train_cmd->add_option("--zoom-hi", train_opt.config.ranges.zoom_hi, "zoom upper bound")
      ->capture_default_str();
  train_cmd->add_option("--flip-prob", train_opt.config.ranges.flip_prob, "horizontal flip probability")
      ->capture_default_str();
  train_cmd->add_option("--config", train_config_path, "key=value file; explicit flags win");

  ecov::EvalOptions eval_opt;
  std::string eval_mode = "soft";
  auto* eval_cmd = app.add_subcommand("eval", "score a manifest against a training run");
  eval_cmd->add_option("--run", eval_opt.run_dir, "training run directory")->required();
  eval_cmd->add_option("--manifest", eval_opt.manifest_path, "evaluation manifest CSV")->required();
  eval_cmd->add_option("--ensemble", eval_mode, "none, hard, or soft")->capture_default_str();
  eval_cmd->add_option("--m", eval_opt.m, "use the last m snapshots (0 = all)")->capture_default_str();
  eval_cmd->add_option("--roc-out", eval_opt.roc_out_dir, "directory for ROC point CSV files");

  ecov::PredictOptions pred_opt;
  std::string pred_mode = "soft";
  auto* pred_cmd = app.add_subcommand("predict", "per-sample class probabilities");
  pred_cmd->add_option("--run", pred_opt.run_dir, "training run directory")->required();
  pred_cmd->add_option("--manifest", pred_opt.manifest_path, "manifest CSV")->required();
  pred_cmd->add_option("--mode", pred_mode, "none, hard, or soft")->capture_default_str();
  pred_cmd->add_option("--m", pred_opt.m, "use the last m snapshots (0 = all)")->capture_default_str();

  ecov::ExplainOptions exp_opt;
  auto* exp_cmd = app.add_subcommand("explain", "saliency overlays per image and snapshot");
  exp_cmd->add_option("--run", exp_opt.run_dir, "training run directory")->required();
  exp_cmd->add_option("--manifest", exp_opt.manifest_path, "manifest CSV")->required();
  exp_cmd->add_option("--out", exp_opt.out_dir, "overlay output directory")->required();
  exp_cmd->add_option("--class", exp_opt.target_class, "target class (-1 = predicted)")
      ->capture_default_str();
  exp_cmd->add_option("--limit", exp_opt.limit, "explain only the first N images (0 = all)")
      ->capture_default_str();
  exp_cmd->add_option("--snapshot", exp_opt.snapshot, "only this snapshot (0 = every snapshot)")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsageError;
  }

  try {
    if (*arch_cmd) {
      ecov::run_arch(arch_opt, std::cout);
    } else if (*toy_cmd) {
      ecov::run_gen_toy(toy_opt, std::cout);
    } else if (*train_cmd) {
      if (!train_config_path.empty()) {
        const ecov::KvConfig cfg = ecov::KvConfig::from_file(train_config_path);
        auto unset = [&](const char* flag) { return train_cmd->count(flag) == 0; };
        if (unset("--arch")) train_opt.arch = cfg.get_string("arch", train_opt.arch);
        if (unset("--classes")) train_classes = cfg.get_string("classes", train_classes);
        if (unset("--val-fraction"))
          train_opt.val_fraction = cfg.get_double("val_fraction", train_opt.val_fraction);
        if (unset("--epochs"))
          train_opt.config.total_epochs =
              static_cast<int>(cfg.get_int("epochs", train_opt.config.total_epochs));
        if (unset("--batch-size"))
          train_opt.config.batch_size =
              static_cast<int>(cfg.get_int("batch_size", train_opt.config.batch_size));
        if (unset("--lr")) train_opt.config.initial_lr = cfg.get_double("initial_lr", train_opt.config.initial_lr);
        if (unset("--cycles"))
          train_opt.config.cycles = static_cast<int>(cfg.get_int("cycles", train_opt.config.cycles));
        if (unset("--seed")) train_opt.config.seed = cfg.get_u64("seed", train_opt.config.seed);
        if (unset("--class-weights")) train_weights = cfg.get_string("class_weights", train_weights);
        if (unset("--no-augment")) train_opt.config.augment = cfg.get_bool("augment", true);
        auto& r = train_opt.config.ranges;
        if (unset("--rotation")) r.rotation_deg = cfg.get_double("rotation", r.rotation_deg);
        if (unset("--shear")) r.shear_deg = cfg.get_double("shear", r.shear_deg);
        if (unset("--zoom-lo")) r.zoom_lo = cfg.get_double("zoom_lo", r.zoom_lo);
        if (unset("--zoom-hi")) r.zoom_hi = cfg.get_double("zoom_hi", r.zoom_hi);
        if (unset("--flip-prob")) r.flip_prob = cfg.get_double("flip_prob", r.flip_prob);
      }
      if (no_augment) train_opt.config.augment = false;
      if (train_weights == "none") {
        train_opt.config.weight_mode = ecov::ClassWeightMode::kNone;
      } else if (train_weights == "inverse") {
        train_opt.config.weight_mode = ecov::ClassWeightMode::kInverseFrequency;
      } else {
        throw ecov::ArgumentError("--class-weights must be 'none' or 'inverse', got '" + train_weights +
                                  "'");
      }
      if (!train_classes.empty()) train_opt.class_names = parse_class_list(train_classes);
      ecov::run_train(train_opt, std::cout);
    } else if (*eval_cmd) {
      eval_opt.mode = ecov::parse_ensemble_mode(eval_mode);
      ecov::run_eval(eval_opt, std::cout);
    } else if (*pred_cmd) {
      pred_opt.mode = ecov::parse_ensemble_mode(pred_mode);
      ecov::run_predict(pred_opt, std::cout);
    } else if (*exp_cmd) {
      ecov::run_explain(exp_opt, std::cout);
    }
  } catch (const ecov::ArgumentError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const ecov::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kNumericError;
  } catch (const ecov::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kDataError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDataError;
  }
  return 0;
}

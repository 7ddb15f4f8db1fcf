#include "ecovnet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>

namespace ecov {

std::vector<std::vector<int64_t>> confusion_matrix(const std::vector<int>& y_true,
                                                   const std::vector<int>& y_pred, int num_classes) {
  if (y_true.size() != y_pred.size())
    throw DimensionError("confusion_matrix: label vectors differ in length");
  if (num_classes < 1) throw ArgumentError("confusion_matrix: need at least one class");

  std::vector<std::vector<int64_t>> m(static_cast<size_t>(num_classes),
                                      std::vector<int64_t>(static_cast<size_t>(num_classes), 0));
  for (size_t i = 0; i < y_true.size(); ++i) {
    const int t = y_true[i], p = y_pred[i];
    if (t < 0 || t >= num_classes || p < 0 || p >= num_classes)
      throw ArgumentError("confusion_matrix: label outside [0," + std::to_string(num_classes) +
                          ") at row " + std::to_string(i));
    ++m[static_cast<size_t>(t)][static_cast<size_t>(p)];
  }
  return m;
}

ClassStats prf1(int64_t tp, int64_t fp, int64_t fn, int64_t tn) {
  if (tp < 0 || fp < 0 || fn < 0 || tn < 0) throw ArgumentError("prf1: counts must be nonnegative");
  ClassStats s;
  s.tp = tp;
  s.fp = fp;
  s.fn = fn;
  s.tn = tn;

  if (tp + fp == 0) {
    s.precision_degenerate = true;
  } else {
    s.precision = 100.0 * static_cast<double>(tp) / static_cast<double>(tp + fp);
  }
  if (tp + fn == 0) {
    s.recall_degenerate = true;
  } else {
    s.recall = 100.0 * static_cast<double>(tp) / static_cast<double>(tp + fn);
  }
  if (s.precision + s.recall == 0.0) {
    s.f1_degenerate = true;
  } else {
    s.f1 = 2.0 * s.precision * s.recall / (s.precision + s.recall);
  }
  return s;
}

AccuracyCI accuracy_ci(int64_t correct, int64_t total, double z) {
  if (total < 1) throw ArgumentError("accuracy_ci: total must be >= 1");
  if (correct < 0 || correct > total)
    throw ArgumentError("accuracy_ci: correct count outside [0, total]");
  const double acc = static_cast<double>(correct) / static_cast<double>(total);
  AccuracyCI ci;
  ci.accuracy_percent = 100.0 * acc;
  ci.halfwidth_percent = 100.0 * z * std::sqrt(acc * (1.0 - acc) / static_cast<double>(total));
  return ci;
}

RocCurve binary_roc(const std::vector<int>& truth01, const std::vector<double>& scores) {
  if (truth01.size() != scores.size()) throw DimensionError("binary_roc: vectors differ in length");
  int64_t n_pos = 0, n_neg = 0;
  for (size_t i = 0; i < truth01.size(); ++i) {
    if (truth01[i] != 0 && truth01[i] != 1) throw ArgumentError("binary_roc: truth must be 0/1");
    if (!(scores[i] >= 0.0 && scores[i] <= 1.0))
      throw ArgumentError("binary_roc: scores must lie in [0,1]");
    (truth01[i] == 1 ? n_pos : n_neg) += 1;
  }

  RocCurve curve;
  if (n_pos == 0 || n_neg == 0) {
    curve.defined = false;
    return curve;
  }
  curve.defined = true;

  std::vector<size_t> order(truth01.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return scores[a] > scores[b]; });

  curve.points.push_back({0.0, 0.0, std::nextafter(1.0, 2.0)});
  int64_t tp = 0, fp = 0;
  size_t i = 0;
  double auc = 0.0;
  double prev_fpr = 0.0, prev_tpr = 0.0;
  while (i < order.size()) {
    const double thr = scores[order[i]];
    while (i < order.size() && scores[order[i]] == thr) {
      (truth01[order[i]] == 1 ? tp : fp) += 1;
      ++i;
    }
    const double fpr = static_cast<double>(fp) / static_cast<double>(n_neg);
    const double tpr = static_cast<double>(tp) / static_cast<double>(n_pos);
    curve.points.push_back({fpr, tpr, thr});
    auc += (fpr - prev_fpr) * (tpr + prev_tpr) / 2.0;
    prev_fpr = fpr;
    prev_tpr = tpr;
  }
  curve.auc = auc;
  return curve;
}

namespace {

// Upper-envelope linear interpolation of a curve at the given false positive
// rate; vertical segments contribute their topmost point. Points arrive in
// sweep order, so fpr and tpr are both nondecreasing.
double interp_tpr(const RocCurve& curve, double fpr) {
  double below_fpr = 0.0, below_tpr = 0.0;
  for (const auto& p : curve.points) {
    if (p.fpr <= fpr) {
      below_fpr = p.fpr;
      below_tpr = p.tpr;
    } else {
      if (below_fpr == fpr) return below_tpr;
      return below_tpr + (p.tpr - below_tpr) * (fpr - below_fpr) / (p.fpr - below_fpr);
    }
  }
  return below_tpr;
}

} // namespace

EvaluationReport evaluate(const std::vector<int>& y_true, const std::vector<int>& y_pred,
                          const std::vector<std::vector<double>>& scores, int num_classes) {
  if (!scores.empty() && scores.size() != y_true.size())
    throw DimensionError("evaluate: score rows must match label count");

  EvaluationReport report;
  report.num_classes = num_classes;
  report.total = static_cast<int64_t>(y_true.size());
  report.confusion = confusion_matrix(y_true, y_pred, num_classes);

  int64_t correct = 0;
  for (int c = 0; c < num_classes; ++c) correct += report.confusion[static_cast<size_t>(c)][static_cast<size_t>(c)];
  report.accuracy = accuracy_ci(correct, report.total);

  for (int c = 0; c < num_classes; ++c) {
    const auto& row = report.confusion[static_cast<size_t>(c)];
    int64_t tp = row[static_cast<size_t>(c)];
    int64_t fn = 0, fp = 0;
    for (int j = 0; j < num_classes; ++j) {
      if (j == c) continue;
      fn += row[static_cast<size_t>(j)];
      fp += report.confusion[static_cast<size_t>(j)][static_cast<size_t>(c)];
    }
    const int64_t tn = report.total - tp - fn - fp;
    report.per_class.push_back(prf1(tp, fp, fn, tn));
  }

  if (!scores.empty()) {
    std::vector<int> pooled_truth;
    std::vector<double> pooled_scores;
    for (int c = 0; c < num_classes; ++c) {
      std::vector<int> truth(y_true.size());
      std::vector<double> cls_scores(y_true.size());
      for (size_t i = 0; i < y_true.size(); ++i) {
        if (static_cast<int>(scores[i].size()) != num_classes)
          throw DimensionError("evaluate: score row " + std::to_string(i) + " has wrong class count");
        truth[i] = y_true[i] == c ? 1 : 0;
        cls_scores[i] = scores[i][static_cast<size_t>(c)];
        pooled_truth.push_back(truth[i]);
        pooled_scores.push_back(cls_scores[i]);
      }
      report.roc_per_class.push_back(binary_roc(truth, cls_scores));
    }
    report.roc_micro = binary_roc(pooled_truth, pooled_scores);

    // macro: mean AUC over defined classes, curve averaged on the union grid
    std::vector<double> grid;
    double auc_sum = 0.0;
    int defined = 0;
    for (const auto& curve : report.roc_per_class) {
      if (!curve.defined) continue;
      ++defined;
      auc_sum += curve.auc;
      for (const auto& p : curve.points) grid.push_back(p.fpr);
    }
    if (defined > 0) {
      std::sort(grid.begin(), grid.end());
      grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
      report.roc_macro.defined = true;
      report.roc_macro.auc = auc_sum / static_cast<double>(defined);
      for (const double g : grid) {
        double tpr = 0.0;
        for (const auto& curve : report.roc_per_class)
          if (curve.defined) tpr += interp_tpr(curve, g);
        report.roc_macro.points.push_back({g, tpr / static_cast<double>(defined), 0.0});
      }
    }
  }
  return report;
}

std::string format_report_csv(const EvaluationReport& report,
                              const std::vector<std::string>& class_names) {
  if (static_cast<int>(class_names.size()) != report.num_classes)
    throw ArgumentError("format_report_csv: class name count mismatch");
  std::ostringstream os;
  os << std::fixed << std::setprecision(4);

  os << "confusion_matrix\ntrue\\pred";
  for (const auto& n : class_names) os << ',' << n;
  os << '\n';
  for (int t = 0; t < report.num_classes; ++t) {
    os << class_names[static_cast<size_t>(t)];
    for (int p = 0; p < report.num_classes; ++p)
      os << ',' << report.confusion[static_cast<size_t>(t)][static_cast<size_t>(p)];
    os << '\n';
  }

  os << "\nper_class\nclass,tp,fp,fn,tn,precision,recall,f1,auc\n";
  for (int c = 0; c < report.num_classes; ++c) {
    const auto& s = report.per_class[static_cast<size_t>(c)];
    os << class_names[static_cast<size_t>(c)] << ',' << s.tp << ',' << s.fp << ',' << s.fn << ','
       << s.tn << ',' << s.precision << ',' << s.recall << ',' << s.f1 << ',';
    if (c < static_cast<int>(report.roc_per_class.size()) &&
        report.roc_per_class[static_cast<size_t>(c)].defined) {
      os << report.roc_per_class[static_cast<size_t>(c)].auc;
    } else {
      os << "undefined";
    }
    os << '\n';
  }

  os << "\nsummary\nsamples,accuracy_percent,ci95_halfwidth_percent,micro_auc,macro_auc\n";
  os << report.total << ',' << report.accuracy.accuracy_percent << ','
     << report.accuracy.halfwidth_percent << ',';
  if (report.roc_micro.defined) {
    os << report.roc_micro.auc;
  } else {
    os << "undefined";
  }
  os << ',';
  if (report.roc_macro.defined) {
    os << report.roc_macro.auc;
  } else {
    os << "undefined";
  }
  os << '\n';
  return os.str();
}

std::string format_roc_points_csv(const RocCurve& curve) {
  std::ostringstream os;
  os << "fpr,tpr,threshold\n";
  os << std::setprecision(10);
  for (const auto& p : curve.points) os << p.fpr << ',' << p.tpr << ',' << p.threshold << '\n';
  return os.str();
}

} // namespace ecov

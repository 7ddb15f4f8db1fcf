#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ecovnet/errors.hpp"

// Evaluation arithmetic: confusion matrix, per-class precision/recall/F1 in
// percent, accuracy with a 95% normal-approximation interval, and one-vs-rest
// ROC/AUC with micro and macro averages.

namespace ecov {

struct ClassStats {
  int64_t tp = 0, fp = 0, fn = 0, tn = 0;
  double precision = 0.0, recall = 0.0, f1 = 0.0; // percent
  // set when a 0/0 ratio was defined to 0 by convention
  bool precision_degenerate = false, recall_degenerate = false, f1_degenerate = false;
};

struct RocPoint {
  double fpr = 0.0, tpr = 0.0, threshold = 0.0;
};

struct RocCurve {
  std::vector<RocPoint> points;
  double auc = 0.0;
  bool defined = false; // false when either class side is absent
};

struct AccuracyCI {
  double accuracy_percent = 0.0;
  double halfwidth_percent = 0.0;
};

struct EvaluationReport {
  int num_classes = 0;
  int64_t total = 0;
  std::vector<std::vector<int64_t>> confusion; // [true][pred]
  std::vector<ClassStats> per_class;
  AccuracyCI accuracy;
  std::vector<RocCurve> roc_per_class;
  RocCurve roc_micro;
  RocCurve roc_macro; // auc = unweighted mean over defined classes
};

std::vector<std::vector<int64_t>> confusion_matrix(const std::vector<int>& y_true,
                                                   const std::vector<int>& y_pred, int num_classes);

ClassStats prf1(int64_t tp, int64_t fp, int64_t fn, int64_t tn);

// acc +- z*sqrt(acc*(1-acc)/n), both in percent.
AccuracyCI accuracy_ci(int64_t correct, int64_t total, double z = 1.96);

// Descending-score threshold sweep with tied scores grouped; trapezoidal AUC.
RocCurve binary_roc(const std::vector<int>& truth01, const std::vector<double>& scores);

// scores[sample][class] are one-vs-rest probabilities in [0,1].
EvaluationReport evaluate(const std::vector<int>& y_true, const std::vector<int>& y_pred,
                          const std::vector<std::vector<double>>& scores, int num_classes);

std::string format_report_csv(const EvaluationReport& report,
                              const std::vector<std::string>& class_names);
std::string format_roc_points_csv(const RocCurve& curve);

} // namespace ecov

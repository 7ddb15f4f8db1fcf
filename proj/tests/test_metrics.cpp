#include <doctest.h>

#include <cmath>
#include <vector>

#include "ecovnet/metrics.hpp"
#include "ecovnet/rng.hpp"

using ecov::Rng;

namespace {

// Pair-counting area: P(score_pos > score_neg) + 0.5 P(equal), evaluated
// literally over every positive/negative pair.
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

} // namespace

TEST_CASE("confusion matrix counts true rows against predicted columns") {
  const std::vector<int> y_true{0, 0, 1, 1, 2, 2, 2};
  const std::vector<int> y_pred{0, 1, 1, 1, 2, 0, 2};
  const auto m = ecov::confusion_matrix(y_true, y_pred, 3);
  CHECK(m[0][0] == 1);
  CHECK(m[0][1] == 1);
  CHECK(m[1][1] == 2);
  CHECK(m[2][0] == 1);
  CHECK(m[2][2] == 2);
  int64_t total = 0;
  for (const auto& row : m)
    for (int64_t v : row) total += v;
  CHECK(total == 7);

  CHECK_THROWS_AS(ecov::confusion_matrix({0}, {0, 1}, 2), ecov::DimensionError);
  CHECK_THROWS_AS(ecov::confusion_matrix({0, 3}, {0, 1}, 2), ecov::ArgumentError);
}

TEST_CASE("precision recall and f1 match the published class row") {
  // 100 true positives, 8 false alarms, nothing missed
  const auto s = ecov::prf1(100, 8, 0, 1471);
  CHECK(s.precision == doctest::Approx(92.59).epsilon(5e-4));
  CHECK(s.recall == doctest::Approx(100.0));
  CHECK(s.f1 == doctest::Approx(96.15).epsilon(5e-4));
  CHECK(!s.precision_degenerate);
  CHECK(!s.f1_degenerate);
}

TEST_CASE("zero denominators produce flagged zeros, not NaN") {
  const auto s = ecov::prf1(0, 0, 0, 10);
  CHECK(s.precision == 0.0);
  CHECK(s.recall == 0.0);
  CHECK(s.f1 == 0.0);
  CHECK(s.precision_degenerate);
  CHECK(s.recall_degenerate);
  CHECK(s.f1_degenerate);

  const auto miss = ecov::prf1(0, 3, 2, 5);
  CHECK(miss.precision == 0.0);
  CHECK(!miss.precision_degenerate);
  CHECK(miss.f1 == 0.0);
  CHECK(miss.f1_degenerate); // precision + recall is zero

  CHECK_THROWS_AS(ecov::prf1(-1, 0, 0, 0), ecov::ArgumentError);
}

TEST_CASE("accuracy intervals reproduce the published halfwidths") {
  const auto big = ecov::accuracy_ci(1520, 1579); // 96.26%
  CHECK(big.accuracy_percent == doctest::Approx(96.26).epsilon(5e-4));
  CHECK(big.halfwidth_percent == doctest::Approx(0.94).epsilon(5e-3));

  const auto small = ecov::accuracy_ci(289, 300); // 96.33%
  CHECK(small.accuracy_percent == doctest::Approx(96.33).epsilon(5e-4));
  CHECK(small.halfwidth_percent == doctest::Approx(2.13).epsilon(5e-3));

  SUBCASE("degenerate rates have zero width and bad counts throw") {
    CHECK(ecov::accuracy_ci(10, 10).halfwidth_percent == 0.0);
    CHECK(ecov::accuracy_ci(0, 10).halfwidth_percent == 0.0);
    CHECK_THROWS_AS(ecov::accuracy_ci(5, 0), ecov::ArgumentError);
    CHECK_THROWS_AS(ecov::accuracy_ci(11, 10), ecov::ArgumentError);
  }
}

TEST_CASE("roc on a hand-built tie case matches the worked area") {
  const std::vector<int> truth{1, 0, 1, 0};
  const std::vector<double> scores{0.9, 0.5, 0.5, 0.2};
  const auto roc = ecov::binary_roc(truth, scores);
  REQUIRE(roc.defined);
  CHECK(roc.auc == doctest::Approx(0.875).epsilon(1e-12));

  REQUIRE(roc.points.size() == 4); // origin plus one point per distinct score
  CHECK(roc.points[0].fpr == 0.0);
  CHECK(roc.points[0].tpr == 0.0);
  CHECK(roc.points[1].tpr == doctest::Approx(0.5));
  CHECK(roc.points[2].fpr == doctest::Approx(0.5)); // the tie moves both rates at once
  CHECK(roc.points[2].tpr == doctest::Approx(1.0));
  CHECK(roc.points[3].fpr == doctest::Approx(1.0));
}

TEST_CASE("roc area equals the pair-counting statistic on random data") {
  Rng rng(31337);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 5 + static_cast<int>(rng.below(40));
    std::vector<int> truth(static_cast<size_t>(n));
    std::vector<double> scores(static_cast<size_t>(n));
    int pos = 0;
    for (int i = 0; i < n; ++i) {
      truth[static_cast<size_t>(i)] = rng.bernoulli(0.4) ? 1 : 0;
      pos += truth[static_cast<size_t>(i)];
      // quantized scores force plenty of exact ties
      scores[static_cast<size_t>(i)] = static_cast<double>(rng.below(8)) / 7.0;
    }
    if (pos == 0 || pos == n) continue;
    const auto roc = ecov::binary_roc(truth, scores);
    REQUIRE(roc.defined);
    CAPTURE(trial);
    CHECK(std::abs(roc.auc - pair_count_auc(truth, scores)) <= 1e-9);
  }
}

TEST_CASE("roc curves are monotone staircases from origin to corner") {
  Rng rng(99);
  std::vector<int> truth;
  std::vector<double> scores;
  for (int i = 0; i < 60; ++i) {
    truth.push_back(rng.bernoulli(0.5) ? 1 : 0);
    scores.push_back(rng.uniform(0.0, 1.0));
  }
  const auto roc = ecov::binary_roc(truth, scores);
  REQUIRE(roc.defined);
  CHECK(roc.points.front().fpr == 0.0);
  CHECK(roc.points.front().tpr == 0.0);
  CHECK(roc.points.back().fpr == doctest::Approx(1.0));
  CHECK(roc.points.back().tpr == doctest::Approx(1.0));
  for (size_t i = 1; i < roc.points.size(); ++i) {
    CHECK(roc.points[i].fpr >= roc.points[i - 1].fpr);
    CHECK(roc.points[i].tpr >= roc.points[i - 1].tpr);
    CHECK(roc.points[i].threshold <= roc.points[i - 1].threshold);
  }
}

TEST_CASE("single-class truth leaves the curve undefined") {
  const auto roc = ecov::binary_roc({1, 1, 1}, {0.2, 0.5, 0.9});
  CHECK(!roc.defined);

  CHECK_THROWS_AS(ecov::binary_roc({0, 2}, {0.5, 0.5}), ecov::ArgumentError);
  CHECK_THROWS_AS(ecov::binary_roc({0, 1}, {0.5, 1.5}), ecov::ArgumentError);
  CHECK_THROWS_AS(ecov::binary_roc({0, 1}, {0.5}), ecov::DimensionError);
}

TEST_CASE("full evaluation ties the pieces together") {
  const std::vector<int> y_true{0, 0, 1, 1, 2, 2};
  const std::vector<int> y_pred{0, 1, 1, 1, 2, 2};
  const std::vector<std::vector<double>> scores{
      {0.8, 0.1, 0.1}, {0.3, 0.5, 0.2}, {0.1, 0.8, 0.1},
      {0.2, 0.6, 0.2}, {0.1, 0.1, 0.8}, {0.0, 0.1, 0.9},
  };
  const auto rep = ecov::evaluate(y_true, y_pred, scores, 3);
  CHECK(rep.total == 6);
  CHECK(rep.accuracy.accuracy_percent == doctest::Approx(5.0 / 6.0 * 100.0));
  CHECK(rep.confusion[0][1] == 1);

  // class 0: tp=1 fp=0 fn=1 tn=4
  CHECK(rep.per_class[0].tp == 1);
  CHECK(rep.per_class[0].fp == 0);
  CHECK(rep.per_class[0].fn == 1);
  CHECK(rep.per_class[0].tn == 4);
  CHECK(rep.per_class[0].recall == doctest::Approx(50.0));

  // each class's own column ranks its members above everyone else -> auc 1
  for (const auto& roc : rep.roc_per_class) {
    REQUIRE(roc.defined);
    CHECK(roc.auc == doctest::Approx(1.0));
  }
  // pooled pairs: 6 positives vs 12 negatives, one inversion
  // (sample 1 scores its own class 0.3 but a rival class 0.5)
  REQUIRE(rep.roc_micro.defined);
  CHECK(rep.roc_micro.auc == doctest::Approx(71.0 / 72.0).epsilon(1e-9));
  REQUIRE(rep.roc_macro.defined);
  CHECK(rep.roc_macro.auc == doctest::Approx(1.0));

  SUBCASE("macro area is the unweighted mean of the defined class areas") {
    // degrade class 2 so its curve is no longer perfect
    auto bad = scores;
    bad[4] = {0.5, 0.3, 0.2};
    const auto rep2 = ecov::evaluate(y_true, y_pred, bad, 3);
    double mean = 0;
    int defined = 0;
    for (const auto& roc : rep2.roc_per_class)
      if (roc.defined) {
        mean += roc.auc;
        ++defined;
      }
    mean /= defined;
    CHECK(rep2.roc_macro.auc == doctest::Approx(mean).epsilon(1e-12));
  }

  SUBCASE("input validation") {
    CHECK_THROWS_AS(ecov::evaluate(y_true, y_pred, scores, 2), ecov::ArgumentError);
    auto short_scores = scores;
    short_scores.pop_back();
    CHECK_THROWS_AS(ecov::evaluate(y_true, y_pred, short_scores, 3), ecov::DimensionError);
  }
}

TEST_CASE("report text carries the three sections") {
  const std::vector<int> y_true{0, 1, 2, 0, 1, 2};
  const std::vector<int> y_pred{0, 1, 2, 0, 1, 1};
  std::vector<std::vector<double>> scores(6, std::vector<double>(3, 1.0 / 3.0));
  const auto rep = ecov::evaluate(y_true, y_pred, scores, 3);
  const std::string text = ecov::format_report_csv(rep, {"covid19", "normal", "pneumonia"});
  CHECK(text.find("confusion_matrix") != std::string::npos);
  CHECK(text.find("true\\pred,covid19,normal,pneumonia") != std::string::npos);
  CHECK(text.find("per_class") != std::string::npos);
  CHECK(text.find("summary") != std::string::npos);
  CHECK(text.find("accuracy_percent") != std::string::npos);

  const std::string pts = ecov::format_roc_points_csv(rep.roc_per_class[0]);
  CHECK(pts.find("fpr,tpr,threshold") != std::string::npos);
}

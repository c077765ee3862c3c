// Copyright 2026 The fedtab Authors. All Rights Reserved.
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>

#include "fedtab/error.hpp"

namespace fedtab {

/// Binary confusion counts with class 1 as positive.
struct ConfusionMatrix {
  std::uint64_t tp = 0, fp = 0, tn = 0, fn = 0;

  std::uint64_t total() const { return tp + fp + tn + fn; }
  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

inline ConfusionMatrix confusion(std::span<const int> predictions, std::span<const int> labels) {
  require(predictions.size() == labels.size(), ErrorKind::kInvalidArgument, "confusion: length mismatch");
  require(!labels.empty(), ErrorKind::kInvalidArgument, "confusion: empty input");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool p = predictions[i] == 1, y = labels[i] == 1;
    if (p && y) ++cm.tp;
    else if (p) ++cm.fp;
    else if (y) ++cm.fn;
    else ++cm.tn;
  }
  return cm;
}

struct MetricsReport {
  double f1 = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double accuracy = 0.0;
  std::uint64_t support_positive = 0;
  std::uint64_t support_negative = 0;

  friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

/// Zero denominators give 0 for precision and recall, and F1 is 0 unless
/// precision + recall > 0.
inline MetricsReport metrics_from(const ConfusionMatrix& cm) {
  require(cm.total() > 0, ErrorKind::kInvalidArgument, "metrics_from: empty confusion matrix");
  MetricsReport r;
  const auto ratio = [](std::uint64_t a, std::uint64_t b) {
    return b == 0 ? 0.0 : static_cast<double>(a) / static_cast<double>(b);
  };
  r.precision = ratio(cm.tp, cm.tp + cm.fp);
  r.recall = ratio(cm.tp, cm.tp + cm.fn);
  r.f1 = r.precision + r.recall > 0.0 ? 2.0 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
  r.accuracy = ratio(cm.tp + cm.tn, cm.total());
  r.support_positive = cm.tp + cm.fn;
  r.support_negative = cm.tn + cm.fp;
  return r;
}

struct TTestResult {
  double t_statistic = 0.0;
  std::size_t degrees_of_freedom = 0;
  bool significant_at_0_05 = false;
};

/// Two-sided critical value of Student's t at alpha = 0.05. Exact table for
/// df 1..30; above that the value for the next lower tabulated df is used,
/// which can only make the test more conservative.
inline double t_critical_0_05(std::size_t df) {
  static constexpr std::array<double, 30> kTable = {
      12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228,
      2.201,  2.179, 2.160, 2.145, 2.131, 2.120, 2.110, 2.101, 2.093, 2.086,
      2.080,  2.074, 2.069, 2.064, 2.060, 2.056, 2.052, 2.048, 2.045, 2.042};
  require(df >= 1, ErrorKind::kInvalidArgument, "t_critical_0_05: df must be >= 1");
  if (df <= 30) return kTable[df - 1];
  if (df < 40) return 2.042;
  if (df < 60) return 2.021;
  if (df < 120) return 2.000;
  return 1.980;
}

/// Paired t-test on d = a - b. Differences whose sample sd vanishes (up to
/// rounding, relative to the mean) take the degenerate branches: all-zero
/// gives t = 0, otherwise t = +-inf and significant.
inline TTestResult paired_t_test(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size(), ErrorKind::kInvalidArgument, "paired_t_test: length mismatch");
  require(a.size() >= 2, ErrorKind::kInvalidArgument, "paired_t_test: at least 2 pairs required");
  const std::size_t n = a.size();
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean += a[i] - b[i];
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double c = (a[i] - b[i]) - mean;
    ss += c * c;
  }
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));

  TTestResult r;
  r.degrees_of_freedom = n - 1;
  if (sd <= 1e-12 * std::max(1.0, std::abs(mean))) {
    if (std::abs(mean) <= 1e-12) return r;
    r.t_statistic = std::copysign(std::numeric_limits<double>::infinity(), mean);
    r.significant_at_0_05 = true;
    return r;
  }
  r.t_statistic = mean / (sd / std::sqrt(static_cast<double>(n)));
  r.significant_at_0_05 = std::abs(r.t_statistic) > t_critical_0_05(r.degrees_of_freedom);
  return r;
}

}  // namespace fedtab

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

// Synthetic cohort with the Framingham column layout, for smoke runs and
// tests when the real file is not at hand. Marginals are roughly those of
// the public cohort; the outcome follows a logistic risk score whose
// intercept is solved so the expected positive rate hits the target.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "fedtab/dataset.hpp"
#include "fedtab/error.hpp"
#include "fedtab/rng.hpp"

namespace fedtab {

struct SyntheticConfig {
  std::size_t rows = 4238;
  double positive_rate = 0.152;
  /// Multiplies every risk coefficient; larger is easier to classify.
  double signal = 1.0;
  std::uint64_t seed = 0;

  void validate() const {
    require(rows >= 2, ErrorKind::kConfig, "synthetic.rows must be >= 2");
    require(positive_rate > 0.0 && positive_rate < 1.0, ErrorKind::kConfig,
            "synthetic.positive_rate must lie in (0,1)");
    require(signal >= 0.0, ErrorKind::kConfig, "synthetic.signal must be >= 0");
  }
};

inline DataTable make_synthetic_framingham(const SyntheticConfig& cfg = {}) {
  cfg.validate();
  Rng rng(derive_seed(cfg.seed, {0x5a7}));
  const auto bern = [&](double p) { return rng.uniform() < p ? 1.0 : 0.0; };
  const auto clamp_normal = [&](double mean, double sd, double lo, double hi) {
    return std::clamp(rng.normal(mean, sd), lo, hi);
  };

  std::vector<std::vector<double>> rows;
  std::vector<double> risk;
  rows.reserve(cfg.rows);
  for (std::size_t i = 0; i < cfg.rows; ++i) {
    const double male = bern(0.43);
    const double age = std::round(clamp_normal(49.6, 8.6, 32.0, 70.0));
    const double smoker = bern(0.49);
    const double cigs = smoker > 0 ? std::max(1.0, std::round(clamp_normal(18.0, 10.0, 1.0, 70.0))) : 0.0;
    const double bp_meds = bern(0.03);
    const double stroke = bern(0.006);
    const double hyp = bern(std::clamp(0.31 + 0.012 * (age - 49.6), 0.02, 0.95));
    const double diabetes = bern(0.026);
    const double chol = std::round(clamp_normal(237.0, 44.0, 107.0, 600.0));
    const double sys = std::round(clamp_normal(125.0 + 0.5 * (age - 49.6) + 22.0 * hyp + 8.0 * bp_meds, 16.0, 83.0, 295.0) * 2.0) / 2.0;
    const double dia = std::round(clamp_normal(0.45 * sys + 23.0, 8.0, 48.0, 142.0) * 2.0) / 2.0;
    const double bmi = std::round(clamp_normal(25.8, 4.1, 15.5, 56.8) * 100.0) / 100.0;
    const double hr = std::round(clamp_normal(75.9, 12.0, 44.0, 143.0));
    const double glucose = std::round(clamp_normal(80.0 + 85.0 * diabetes, 12.0 + 30.0 * diabetes, 40.0, 394.0));
    rows.push_back({male, age, smoker, cigs, bp_meds, stroke, hyp, diabetes, chol, sys, dia, bmi, hr, glucose});
    const double score = 0.075 * (age - 49.6) + 0.55 * male + 0.022 * cigs + 0.025 * (sys - 132.0) +
                         0.75 * diabetes + 0.9 * stroke + 0.35 * hyp + 0.4 * bp_meds + 0.004 * (chol - 237.0) +
                         0.012 * (glucose - 82.0) + 0.015 * (bmi - 25.8);
    risk.push_back(cfg.signal * score);
  }

  // Solve mean(sigmoid(b + risk)) = positive_rate for the intercept.
  const auto mean_prob = [&](double b) {
    double s = 0.0;
    for (double r : risk) s += 1.0 / (1.0 + std::exp(-(b + r)));
    return s / static_cast<double>(risk.size());
  };
  double lo = -40.0, hi = 40.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (mean_prob(mid) < cfg.positive_rate ? lo : hi) = mid;
  }
  const double intercept = 0.5 * (lo + hi);

  DataTable table(framingham_schema());
  for (std::size_t i = 0; i < cfg.rows; ++i) {
    const double p = 1.0 / (1.0 + std::exp(-(intercept + risk[i])));
    table.add_row(rows[i], rng.uniform() < p ? 1 : 0);
  }
  return table;
}

}  // namespace fedtab

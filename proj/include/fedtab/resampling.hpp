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
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fedtab/dataset.hpp"
#include "fedtab/error.hpp"
#include "fedtab/rng.hpp"

namespace fedtab {

enum class SamplingStrategy { kNone, kRos, kRus, kLocalSmote, kFederatedSmote };

inline std::string_view to_string(SamplingStrategy s) {
  switch (s) {
    case SamplingStrategy::kNone: return "none";
    case SamplingStrategy::kRos: return "ros";
    case SamplingStrategy::kRus: return "rus";
    case SamplingStrategy::kLocalSmote: return "local_smote";
    case SamplingStrategy::kFederatedSmote: return "federated_smote";
  }
  return "unknown";
}

/// Smaller class; a tie reports class 1.
inline int minority_label(const DataTable& t) { return t.count(1) <= t.count(0) ? 1 : 0; }

/// Per-column z-score parameters (population standard deviation; a zero
/// deviation is replaced by 1 so constant columns map to 0).
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> scale;

  static Standardizer fit(const DataTable& t) {
    const std::size_t d = t.n_features();
    Standardizer s{std::vector<double>(d, 0.0), std::vector<double>(d, 1.0)};
    if (t.empty()) return s;
    const double n = static_cast<double>(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) {
      for (std::size_t j = 0; j < d; ++j) s.mean[j] += t.at(i, j);
    }
    for (auto& m : s.mean) m /= n;
    std::vector<double> var(d, 0.0);
    for (std::size_t i = 0; i < t.size(); ++i) {
      for (std::size_t j = 0; j < d; ++j) {
        const double c = t.at(i, j) - s.mean[j];
        var[j] += c * c;
      }
    }
    for (std::size_t j = 0; j < d; ++j) {
      const double sd = std::sqrt(var[j] / n);
      s.scale[j] = sd > 0.0 ? sd : 1.0;
    }
    return s;
  }

  static Standardizer identity(std::size_t d) {
    return {std::vector<double>(d, 0.0), std::vector<double>(d, 1.0)};
  }

  std::size_t size() const { return mean.size(); }

  void transform(std::span<const double> x, std::span<double> out) const {
    for (std::size_t j = 0; j < x.size(); ++j) out[j] = (x[j] - mean[j]) / scale[j];
  }

  std::vector<double> transform(std::span<const double> x) const {
    std::vector<double> out(x.size());
    transform(x, out);
    return out;
  }

  DataTable transform(const DataTable& t) const {
    DataTable out = t;
    for (std::size_t i = 0; i < t.size(); ++i) transform(t.row(i), out.row(i));
    return out;
  }

  friend bool operator==(const Standardizer&, const Standardizer&) = default;
};

/// Random oversampling: appends copies of uniformly drawn minority rows
/// (with replacement) until the classes are balanced.
inline DataTable apply_ros(const DataTable& table, std::uint64_t seed) {
  require_both_classes(table, "apply_ros");
  const int minority = minority_label(table);
  const auto pool = table.indices_of(minority);
  const std::size_t deficit = table.count(1 - minority) - pool.size();
  Rng rng(derive_seed(seed, {0x7205}));
  DataTable out = table;
  for (std::size_t s = 0; s < deficit; ++s) {
    const std::size_t src = pool[rng.index(pool.size())];
    out.add_row(table.row(src), minority);
  }
  return out;
}

/// Random undersampling: keeps a without-replacement subset of the
/// majority class the size of the minority class. Row order is preserved.
inline DataTable apply_rus(const DataTable& table, std::uint64_t seed) {
  require_both_classes(table, "apply_rus");
  const int minority = minority_label(table);
  const std::size_t keep = table.count(minority);
  auto majority = table.indices_of(1 - minority);
  Rng rng(derive_seed(seed, {0x7275}));
  rng.shuffle(std::span(majority));
  std::vector<bool> kept(table.size(), false);
  for (std::size_t i = 0; i < table.size(); ++i) kept[i] = table.labels[i] == minority;
  for (std::size_t i = 0; i < keep; ++i) kept[majority[i]] = true;
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < table.size(); ++i) {
    if (kept[i]) idx.push_back(i);
  }
  return table.subset(idx);
}

inline void round_binary_features(const FeatureSchema& schema, std::span<double> x) {
  for (std::size_t j = 0; j < x.size(); ++j) {
    if (schema.kinds[j] == FeatureKind::kBinary) x[j] = x[j] >= 0.5 ? 1.0 : 0.0;
  }
}

/// x + u * (neighbor - x), with binary-kind features rounded to {0,1}.
inline std::vector<double> smote_interpolate(std::span<const double> x,
                                             std::span<const double> neighbor, double u,
                                             const FeatureSchema& schema) {
  std::vector<double> out(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) out[j] = x[j] + u * (neighbor[j] - x[j]);
  round_binary_features(schema, out);
  return out;
}

/// k nearest minority neighbors of every minority row (by position in
/// `rows`), using Euclidean distance on standardized features. Distance
/// ties go to the lower row position.
inline std::vector<std::vector<std::size_t>> minority_neighbors(
    const DataTable& table, std::span<const std::size_t> rows, std::size_t k) {
  const auto scaler = Standardizer::fit(table);
  const std::size_t m = rows.size();
  const std::size_t d = table.n_features();
  std::vector<double> z(m * d);
  for (std::size_t a = 0; a < m; ++a) {
    scaler.transform(table.row(rows[a]), std::span(z).subspan(a * d, d));
  }
  std::vector<std::vector<std::size_t>> neighbors(m);
  std::vector<std::pair<double, std::size_t>> dist;
  for (std::size_t a = 0; a < m; ++a) {
    dist.clear();
    for (std::size_t b = 0; b < m; ++b) {
      if (b == a) continue;
      double s = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        const double diff = z[a * d + j] - z[b * d + j];
        s += diff * diff;
      }
      dist.emplace_back(s, b);
    }
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
    for (std::size_t r = 0; r < k; ++r) neighbors[a].push_back(dist[r].second);
  }
  return neighbors;
}

inline constexpr std::size_t kDefaultSmoteNeighbors = 5;

/// Standard SMOTE. Standardization statistics come from `table` itself.
/// The effective neighbor count is min(k_neighbors, minority - 1).
inline DataTable apply_local_smote(const DataTable& table,
                                   std::size_t k_neighbors = kDefaultSmoteNeighbors,
                                   std::uint64_t seed = 0) {
  require(k_neighbors >= 1, ErrorKind::kInvalidArgument, "apply_local_smote: k_neighbors must be >= 1");
  require_both_classes(table, "apply_local_smote");
  const int minority = minority_label(table);
  const auto pool = table.indices_of(minority);
  require(pool.size() >= 2, ErrorKind::kInvalidArgument,
          "apply_local_smote: minority class needs at least 2 rows");
  const std::size_t k = std::min(k_neighbors, pool.size() - 1);
  const auto neighbors = minority_neighbors(table, pool, k);
  const std::size_t deficit = table.count(1 - minority) - pool.size();

  Rng rng(derive_seed(seed, {0x5307e}));
  DataTable out = table;
  out.values.reserve(out.values.size() + deficit * table.n_features());
  for (std::size_t s = 0; s < deficit; ++s) {
    const std::size_t a = rng.index(pool.size());
    const std::size_t b = neighbors[a][rng.index(k)];
    const double u = rng.uniform_closed();
    out.add_row(smote_interpolate(table.row(pool[a]), table.row(pool[b]), u, table.schema), minority);
  }
  return out;
}

/// Minority-class moments shared in federated SMOTE. These are the only
/// values a client discloses about its rows.
struct ClassStats {
  std::vector<double> mu;
  std::vector<double> sigma2;
  std::uint64_t n_minority = 0;
  std::uint64_t n_majority = 0;
  int minority_label = 1;

  friend bool operator==(const ClassStats&, const ClassStats&) = default;
};

/// Per-feature mean and population variance over the minority rows.
inline ClassStats minority_class_stats(const DataTable& table) {
  require(!table.empty(), ErrorKind::kInvalidArgument, "minority_class_stats: empty table");
  const int minority = minority_label(table);
  const auto rows = table.indices_of(minority);
  require(!rows.empty(), ErrorKind::kSingleClass, "minority_class_stats: empty minority class");
  const std::size_t d = table.n_features();
  ClassStats s;
  s.minority_label = minority;
  s.n_minority = rows.size();
  s.n_majority = table.size() - rows.size();
  s.mu.assign(d, 0.0);
  s.sigma2.assign(d, 0.0);
  const double n = static_cast<double>(rows.size());
  for (auto i : rows) {
    for (std::size_t j = 0; j < d; ++j) s.mu[j] += table.at(i, j);
  }
  for (auto& m : s.mu) m /= n;
  for (auto i : rows) {
    for (std::size_t j = 0; j < d; ++j) {
      const double c = table.at(i, j) - s.mu[j];
      s.sigma2[j] += c * c;
    }
  }
  for (auto& v : s.sigma2) v /= n;
  return s;
}

/// Local resampling dispatch. Federated SMOTE needs the federation and is
/// rejected here.
inline DataTable apply_sampling(const DataTable& table, SamplingStrategy strategy,
                                std::uint64_t seed,
                                std::size_t smote_neighbors = kDefaultSmoteNeighbors) {
  switch (strategy) {
    case SamplingStrategy::kNone: return table;
    case SamplingStrategy::kRos: return apply_ros(table, seed);
    case SamplingStrategy::kRus: return apply_rus(table, seed);
    case SamplingStrategy::kLocalSmote: return apply_local_smote(table, smote_neighbors, seed);
    case SamplingStrategy::kFederatedSmote:
      fail(ErrorKind::kInvalidArgument,
           "apply_sampling: federated_smote is only valid inside a federation run");
  }
  return table;
}

}  // namespace fedtab

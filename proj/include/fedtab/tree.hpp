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
#include <limits>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fedtab/dataset.hpp"
#include "fedtab/error.hpp"
#include "fedtab/parametric.hpp"
#include "fedtab/rng.hpp"

namespace fedtab {

/// One node of a binary tree. Internal nodes send x left iff
/// x[feature] <= threshold. Leaves hold a class-1 fraction (CART) or an
/// additive score (boosting).
struct TreeNode {
  std::int32_t feature = -1;
  double threshold = 0.0;
  double value = 0.0;
  std::int32_t left = -1;
  std::int32_t right = -1;
  /// Split gain recorded at fit time; local bookkeeping, never serialized.
  double gain = 0.0;

  bool is_leaf() const { return feature < 0; }
};

/// Nodes are stored in preorder; the root is nodes[0].
struct Tree {
  std::vector<TreeNode> nodes;

  static Tree leaf(double value) {
    Tree t;
    t.nodes.push_back(TreeNode{.value = value});
    return t;
  }

  double leaf_value(std::span<const double> x) const {
    std::size_t i = 0;
    while (!nodes[i].is_leaf()) {
      const auto& n = nodes[i];
      i = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
    }
    return nodes[i].value;
  }

  /// Vote of a probability-leaf tree: leaf value >= 0.5 -> 1.
  int vote(std::span<const double> x) const { return leaf_value(x) >= 0.5 ? 1 : 0; }

  std::size_t depth() const { return nodes.empty() ? 0 : depth_from(0); }

  std::size_t internal_count() const {
    return static_cast<std::size_t>(
        std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return !n.is_leaf(); }));
  }

  std::set<std::int32_t> features_used() const {
    std::set<std::int32_t> f;
    for (const auto& n : nodes) {
      if (!n.is_leaf()) f.insert(n.feature);
    }
    return f;
  }

  /// Structural equality (gain excluded, since it does not travel).
  friend bool operator==(const Tree& a, const Tree& b) {
    if (a.nodes.size() != b.nodes.size()) return false;
    for (std::size_t i = 0; i < a.nodes.size(); ++i) {
      const auto &x = a.nodes[i], &y = b.nodes[i];
      if (x.feature != y.feature || x.left != y.left || x.right != y.right) return false;
      if (x.is_leaf() ? x.value != y.value : x.threshold != y.threshold) return false;
    }
    return true;
  }

 private:
  std::size_t depth_from(std::size_t i) const {
    const auto& n = nodes[i];
    if (n.is_leaf()) return 0;
    return 1 + std::max(depth_from(static_cast<std::size_t>(n.left)),
                        depth_from(static_cast<std::size_t>(n.right)));
  }
};

enum class EnsembleKind : std::uint8_t { kForestVote = 0, kBoostedSum = 1, kWeightedVote = 2 };

inline std::string_view to_string(EnsembleKind k) {
  switch (k) {
    case EnsembleKind::kForestVote: return "forest_vote";
    case EnsembleKind::kBoostedSum: return "boosted_sum";
    case EnsembleKind::kWeightedVote: return "weighted_vote";
  }
  return "unknown";
}

struct TreeEnsemble {
  EnsembleKind kind = EnsembleKind::kForestVote;
  std::vector<Tree> trees;
  /// Present iff kind == kWeightedVote; sums to 1.
  std::vector<double> weights;
  /// Boosting only: prior log-odds and shrinkage.
  double base_score = 0.0;
  double learning_rate = 1.0;
  /// Width of the feature space the trees were fit on (not serialized).
  std::size_t n_features = 0;

  void validate() const {
    if (kind == EnsembleKind::kWeightedVote) {
      require(weights.size() == trees.size(), ErrorKind::kInvalidArgument,
              "weighted ensemble: one weight per tree required");
      const double s = std::accumulate(weights.begin(), weights.end(), 0.0);
      require(std::abs(s - 1.0) <= 1e-9, ErrorKind::kInvalidArgument,
              "weighted ensemble: weights must sum to 1");
    } else {
      require(weights.empty(), ErrorKind::kInvalidArgument,
              std::string(to_string(kind)) + " ensemble carries no weights");
    }
  }
};

inline void require_kind(const TreeEnsemble& e, EnsembleKind kind, const char* op) {
  require(e.kind == kind, ErrorKind::kInvalidArgument,
          std::string(op) + ": expected a " + std::string(to_string(kind)) + " ensemble, got " +
              std::string(to_string(e.kind)));
}

// ---------------------------------------------------------------------------
// CART

inline constexpr std::size_t kSqrtFeatures = std::numeric_limits<std::size_t>::max();

struct CartOptions {
  std::size_t max_depth = 16;
  std::size_t min_samples_split = 2;
  /// Candidate features; all features when absent.
  std::optional<std::vector<std::size_t>> feature_subset;
  /// Features drawn (without replacement) from the candidates at each
  /// split; 0 uses every candidate, kSqrtFeatures uses floor(sqrt(d)).
  std::size_t features_per_split = 0;
};

namespace detail {

/// Midpoint that is guaranteed to route `lo` left and `hi` right.
inline double split_midpoint(double lo, double hi) {
  const double mid = lo + 0.5 * (hi - lo);
  return mid < hi ? mid : lo;
}

/// a beats b by more than rounding noise.
inline bool strictly_better(double a, double b) {
  if (!std::isfinite(b)) return a > b;
  return a > b + 1e-12 * std::max(1.0, std::abs(b));
}

struct SplitChoice {
  std::int32_t feature = -1;
  double threshold = 0.0;
  double score = -std::numeric_limits<double>::infinity();
};

class CartBuilder {
 public:
  CartBuilder(const DataTable& data, const CartOptions& opts, std::uint64_t seed)
      : data_(data), opts_(opts), rng_(derive_seed(seed, {0xca27})) {
    if (opts.feature_subset) {
      candidates_ = *opts.feature_subset;
      std::sort(candidates_.begin(), candidates_.end());
      candidates_.erase(std::unique(candidates_.begin(), candidates_.end()), candidates_.end());
    } else {
      candidates_.resize(data.n_features());
      std::iota(candidates_.begin(), candidates_.end(), std::size_t{0});
    }
    for (auto f : candidates_) {
      require(f < data.n_features(), ErrorKind::kInvalidArgument, "fit_cart: feature index out of range");
    }
    per_split_ = opts.features_per_split == kSqrtFeatures
                     ? std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(
                                                    std::sqrt(static_cast<double>(data.n_features())))))
                     : opts.features_per_split;
    if (per_split_ == 0 || per_split_ > candidates_.size()) per_split_ = candidates_.size();
  }

  Tree build(std::vector<std::size_t> rows) {
    Tree tree;
    grow(tree, rows, 0);
    return tree;
  }

 private:
  std::vector<std::size_t> features_for_split() {
    if (per_split_ == candidates_.size()) return candidates_;
    auto pool = candidates_;
    for (std::size_t i = 0; i < per_split_; ++i) std::swap(pool[i], pool[i + rng_.index(pool.size() - i)]);
    pool.resize(per_split_);
    std::sort(pool.begin(), pool.end());
    return pool;
  }

  // Maximizes sum over children of (pos^2 + neg^2) / n, which minimizes the
  // size-weighted Gini impurity of the split.
  SplitChoice best_split(std::span<const std::size_t> rows, std::size_t total_pos) {
    SplitChoice best;
    const double n = static_cast<double>(rows.size());
    std::vector<std::pair<double, int>> column(rows.size());
    for (auto f : features_for_split()) {
      for (std::size_t r = 0; r < rows.size(); ++r) column[r] = {data_.at(rows[r], f), data_.labels[rows[r]]};
      std::sort(column.begin(), column.end());
      double left_pos = 0.0;
      for (std::size_t r = 0; r + 1 < column.size(); ++r) {
        left_pos += column[r].second;
        if (column[r].first == column[r + 1].first) continue;
        const double nl = static_cast<double>(r + 1), nr = n - nl;
        const double pl = left_pos, pr = static_cast<double>(total_pos) - left_pos;
        const double score = (pl * pl + (nl - pl) * (nl - pl)) / nl + (pr * pr + (nr - pr) * (nr - pr)) / nr;
        if (strictly_better(score, best.score)) {
          best = {static_cast<std::int32_t>(f), split_midpoint(column[r].first, column[r + 1].first), score};
        }
      }
    }
    return best;
  }

  std::size_t grow(Tree& tree, std::vector<std::size_t>& rows, std::size_t depth) {
    const std::size_t id = tree.nodes.size();
    tree.nodes.emplace_back();
    std::size_t pos = 0;
    for (auto r : rows) pos += static_cast<std::size_t>(data_.labels[r]);
    tree.nodes[id].value = static_cast<double>(pos) / static_cast<double>(rows.size());
    const bool pure = pos == 0 || pos == rows.size();
    if (pure || depth >= opts_.max_depth || rows.size() < opts_.min_samples_split) return id;

    const auto split = best_split(rows, pos);
    if (split.feature < 0) return id;

    std::vector<std::size_t> left, right;
    for (auto r : rows) {
      (data_.at(r, static_cast<std::size_t>(split.feature)) <= split.threshold ? left : right).push_back(r);
    }
    const double n = static_cast<double>(rows.size());
    const double parent = (static_cast<double>(pos * pos) + static_cast<double>((rows.size() - pos) * (rows.size() - pos))) / n;
    rows.clear();
    rows.shrink_to_fit();

    tree.nodes[id].feature = split.feature;
    tree.nodes[id].threshold = split.threshold;
    tree.nodes[id].gain = split.score - parent;
    const auto l = grow(tree, left, depth + 1);
    const auto r = grow(tree, right, depth + 1);
    tree.nodes[id].left = static_cast<std::int32_t>(l);
    tree.nodes[id].right = static_cast<std::int32_t>(r);
    return id;
  }

  const DataTable& data_;
  const CartOptions& opts_;
  Rng rng_;
  std::vector<std::size_t> candidates_;
  std::size_t per_split_ = 0;
};

}  // namespace detail

/// Greedy Gini CART on the given rows (repeats allowed, as in a bootstrap
/// sample). Thresholds are midpoints between consecutive sorted unique
/// values; ties in split quality go to the lowest feature index, then the
/// lowest threshold. Leaves store the positive fraction.
inline Tree fit_cart_rows(const DataTable& train, std::vector<std::size_t> rows, const CartOptions& opts,
                          std::uint64_t seed = 0) {
  require(!rows.empty(), ErrorKind::kInvalidArgument, "fit_cart: empty table");
  detail::CartBuilder builder(train, opts, seed);
  return builder.build(std::move(rows));
}

inline Tree fit_cart(const DataTable& train, const CartOptions& opts = {}, std::uint64_t seed = 0) {
  require(!train.empty(), ErrorKind::kInvalidArgument, "fit_cart: empty table");
  std::vector<std::size_t> rows(train.size());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return fit_cart_rows(train, std::move(rows), opts, seed);
}

// ---------------------------------------------------------------------------
// Random forest

struct ForestConfig {
  std::size_t n_trees = 100;
  std::size_t max_depth = 16;
  std::size_t min_samples_split = 2;
  std::size_t features_per_split = kSqrtFeatures;
  bool bootstrap = true;
  std::uint64_t seed = 0;

  void validate() const {
    require(n_trees >= 1, ErrorKind::kConfig, "forest.n_trees must be >= 1");
    require(min_samples_split >= 2, ErrorKind::kConfig, "forest.min_samples_split must be >= 2");
  }
};

/// k bootstrap CART trees with per-split feature subsampling. Tree i uses
/// seed derive_seed(config.seed, {i}), so trees are independent of fit order.
inline TreeEnsemble fit_random_forest(const DataTable& train, const ForestConfig& config) {
  config.validate();
  require(!train.empty(), ErrorKind::kInvalidArgument, "fit_random_forest: empty table");
  TreeEnsemble forest;
  forest.kind = EnsembleKind::kForestVote;
  forest.n_features = train.n_features();
  forest.trees.reserve(config.n_trees);
  CartOptions opts;
  opts.max_depth = config.max_depth;
  opts.min_samples_split = config.min_samples_split;
  opts.features_per_split = config.features_per_split;
  for (std::size_t t = 0; t < config.n_trees; ++t) {
    const auto tree_seed = derive_seed(config.seed, {t});
    std::vector<std::size_t> rows(train.size());
    if (config.bootstrap) {
      Rng rng(derive_seed(tree_seed, {0xb007}));
      for (auto& r : rows) r = rng.index(train.size());
    } else {
      std::iota(rows.begin(), rows.end(), std::size_t{0});
    }
    forest.trees.push_back(fit_cart_rows(train, std::move(rows), opts, tree_seed));
  }
  return forest;
}

/// Majority vote of the member trees; an exact tie predicts 1.
inline int predict_forest_vote(const TreeEnsemble& ensemble, std::span<const double> x) {
  require_kind(ensemble, EnsembleKind::kForestVote, "predict_forest_vote");
  require(!ensemble.trees.empty(), ErrorKind::kInvalidArgument, "predict_forest_vote: empty ensemble");
  std::size_t ones = 0;
  for (const auto& t : ensemble.trees) ones += static_cast<std::size_t>(t.vote(x));
  return 2 * ones >= ensemble.trees.size() ? 1 : 0;
}

/// f(x) = sum_i w_i * T_i(x) with T_i(x) in {0,1}; class 1 iff f(x) >= 0.5.
inline int predict_weighted_vote(const TreeEnsemble& ensemble, std::span<const double> x) {
  require_kind(ensemble, EnsembleKind::kWeightedVote, "predict_weighted_vote");
  require(!ensemble.trees.empty(), ErrorKind::kInvalidArgument, "predict_weighted_vote: empty ensemble");
  double f = 0.0;
  for (std::size_t i = 0; i < ensemble.trees.size(); ++i) f += ensemble.weights[i] * ensemble.trees[i].vote(x);
  return f >= 0.5 - 1e-12 ? 1 : 0;
}

// ---------------------------------------------------------------------------
// Gradient boosting (second-order, logistic loss)

struct GbtConfig {
  std::size_t n_rounds = 100;
  double learning_rate = 0.1;
  std::size_t max_depth = 4;
  double reg_lambda = 1.0;
  double min_child_weight = 1.0;
  /// Row fraction drawn without replacement per round (1 = all rows).
  double subsample = 1.0;
  std::uint64_t seed = 0;

  void validate() const {
    require(learning_rate > 0.0, ErrorKind::kConfig, "gbt.learning_rate must be > 0");
    require(reg_lambda >= 0.0, ErrorKind::kConfig, "gbt.reg_lambda must be >= 0");
    require(min_child_weight >= 0.0, ErrorKind::kConfig, "gbt.min_child_weight must be >= 0");
    require(subsample > 0.0 && subsample <= 1.0, ErrorKind::kConfig, "gbt.subsample must lie in (0,1]");
  }
};

/// Structure score gain of splitting (G,H) into (GL,HL) and (GR,HR).
inline double split_gain(double gl, double hl, double gr, double hr, double lambda) {
  const double g = gl + gr, h = hl + hr;
  return 0.5 * (gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - g * g / (h + lambda));
}

inline double leaf_weight(double g, double h, double lambda) { return -g / (h + lambda); }

namespace detail {

class GbtTreeBuilder {
 public:
  GbtTreeBuilder(const DataTable& data, std::span<const double> grad, std::span<const double> hess,
                 const GbtConfig& cfg)
      : data_(data), grad_(grad), hess_(hess), cfg_(cfg) {}

  Tree build(std::vector<std::size_t> rows) {
    Tree tree;
    grow(tree, rows, 0);
    return tree;
  }

 private:
  std::size_t grow(Tree& tree, std::vector<std::size_t>& rows, std::size_t depth) {
    const std::size_t id = tree.nodes.size();
    tree.nodes.emplace_back();
    double g = 0.0, h = 0.0;
    for (auto r : rows) {
      g += grad_[r];
      h += hess_[r];
    }
    tree.nodes[id].value = leaf_weight(g, h, cfg_.reg_lambda);
    if (depth >= cfg_.max_depth || rows.size() < 2) return id;

    SplitChoice best;
    best.score = 0.0;  // only positive gains split
    std::vector<std::size_t> order(rows.size());
    for (std::size_t f = 0; f < data_.n_features(); ++f) {
      std::copy(rows.begin(), rows.end(), order.begin());
      std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const double va = data_.at(a, f), vb = data_.at(b, f);
        return va < vb || (va == vb && a < b);
      });
      double gl = 0.0, hl = 0.0;
      for (std::size_t k = 0; k + 1 < order.size(); ++k) {
        gl += grad_[order[k]];
        hl += hess_[order[k]];
        const double v = data_.at(order[k], f), next = data_.at(order[k + 1], f);
        if (v == next) continue;
        const double gr = g - gl, hr = h - hl;
        if (hl < cfg_.min_child_weight || hr < cfg_.min_child_weight) continue;
        const double gain = split_gain(gl, hl, gr, hr, cfg_.reg_lambda);
        if (strictly_better(gain, best.score)) {
          best = {static_cast<std::int32_t>(f), split_midpoint(v, next), gain};
        }
      }
    }
    if (best.feature < 0) return id;

    std::vector<std::size_t> left, right;
    for (auto r : rows) {
      (data_.at(r, static_cast<std::size_t>(best.feature)) <= best.threshold ? left : right).push_back(r);
    }
    rows.clear();
    rows.shrink_to_fit();
    tree.nodes[id].feature = best.feature;
    tree.nodes[id].threshold = best.threshold;
    tree.nodes[id].gain = best.score;
    const auto l = grow(tree, left, depth + 1);
    const auto r = grow(tree, right, depth + 1);
    tree.nodes[id].left = static_cast<std::int32_t>(l);
    tree.nodes[id].right = static_cast<std::int32_t>(r);
    return id;
  }

  const DataTable& data_;
  std::span<const double> grad_;
  std::span<const double> hess_;
  const GbtConfig& cfg_;
};

}  // namespace detail

/// Raw additive score base + eta * sum of the first `n_trees` tree outputs.
inline double gbt_margin(const TreeEnsemble& ensemble, std::span<const double> x,
                         std::size_t n_trees = std::numeric_limits<std::size_t>::max()) {
  require_kind(ensemble, EnsembleKind::kBoostedSum, "gbt_margin");
  double s = 0.0;
  const std::size_t m = std::min(n_trees, ensemble.trees.size());
  for (std::size_t t = 0; t < m; ++t) s += ensemble.trees[t].leaf_value(x);
  return ensemble.base_score + ensemble.learning_rate * s;
}

inline double predict_gbt(const TreeEnsemble& ensemble, std::span<const double> x) {
  return sigmoid(gbt_margin(ensemble, x));
}

/// Mean logistic loss of the model truncated to its first `n_trees` trees.
inline double gbt_log_loss(const TreeEnsemble& ensemble, const DataTable& data,
                           std::size_t n_trees = std::numeric_limits<std::size_t>::max()) {
  double loss = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) loss += logit_loss(gbt_margin(ensemble, data.row(i), n_trees), data.labels[i]);
  return loss / static_cast<double>(data.size());
}

/// Additive logistic model F_m = F_{m-1} + eta * T_m, starting from the
/// prior log-odds. Each T_m is grown greedily on gradients g = p - y and
/// hessians h = p(1-p) with leaf weights -G/(H + lambda).
inline TreeEnsemble fit_gbt(const DataTable& train, const GbtConfig& config) {
  config.validate();
  require_both_classes(train, "fit_gbt");
  const double prior = train.positive_rate();
  TreeEnsemble model;
  model.kind = EnsembleKind::kBoostedSum;
  model.base_score = std::log(prior / (1.0 - prior));
  model.learning_rate = config.learning_rate;
  model.n_features = train.n_features();

  const std::size_t n = train.size();
  std::vector<double> margin(n, model.base_score), grad(n), hess(n);
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), std::size_t{0});
  for (std::size_t round = 0; round < config.n_rounds; ++round) {
    for (std::size_t i = 0; i < n; ++i) {
      const double p = sigmoid(margin[i]);
      grad[i] = p - train.labels[i];
      hess[i] = p * (1.0 - p);
    }
    std::vector<std::size_t> rows = all;
    if (config.subsample < 1.0) {
      Rng rng(derive_seed(config.seed, {0x9b7, round}));
      rng.shuffle(std::span(rows));
      rows.resize(std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(config.subsample * static_cast<double>(n)))));
      std::sort(rows.begin(), rows.end());
    }
    detail::GbtTreeBuilder builder(train, grad, hess, config);
    model.trees.push_back(builder.build(std::move(rows)));
    const auto& tree = model.trees.back();
    for (std::size_t i = 0; i < n; ++i) margin[i] += config.learning_rate * tree.leaf_value(train.row(i));
  }
  return model;
}

// ---------------------------------------------------------------------------
// Feature importance and the top-p distillation tree

struct FeatureImportance {
  std::vector<double> scores;
  /// Feature indices by descending score, ties by ascending index.
  std::vector<std::size_t> ranking;

  static FeatureImportance from_scores(std::vector<double> scores) {
    FeatureImportance fi{std::move(scores), {}};
    fi.ranking.resize(fi.scores.size());
    std::iota(fi.ranking.begin(), fi.ranking.end(), std::size_t{0});
    std::stable_sort(fi.ranking.begin(), fi.ranking.end(),
                     [&](std::size_t a, std::size_t b) { return fi.scores[a] > fi.scores[b]; });
    return fi;
  }
};

/// Total split gain per feature over every internal node of the ensemble.
inline FeatureImportance gbt_feature_importance(const TreeEnsemble& ensemble, std::size_t n_features = 0) {
  require_kind(ensemble, EnsembleKind::kBoostedSum, "gbt_feature_importance");
  if (n_features == 0) n_features = ensemble.n_features;
  std::vector<double> scores(n_features, 0.0);
  for (const auto& tree : ensemble.trees) {
    for (const auto& node : tree.nodes) {
      if (node.is_leaf()) continue;
      const auto f = static_cast<std::size_t>(node.feature);
      if (f >= scores.size()) scores.resize(f + 1, 0.0);
      scores[f] += node.gain;
    }
  }
  return FeatureImportance::from_scores(std::move(scores));
}

/// CART restricted to the `p` top-ranked features, all of them considered at
/// every split.
inline Tree fit_top_p_tree(const DataTable& train, const FeatureImportance& importance, std::size_t p,
                           std::size_t max_depth) {
  require(p >= 1, ErrorKind::kInvalidArgument, "fit_top_p_tree: p must be >= 1");
  require(p <= train.n_features() && p <= importance.ranking.size(), ErrorKind::kInvalidArgument,
          "fit_top_p_tree: p exceeds the feature count");
  std::vector<std::size_t> top(importance.ranking.begin(),
                               importance.ranking.begin() + static_cast<std::ptrdiff_t>(p));
  CartOptions opts{.max_depth = max_depth, .feature_subset = std::move(top)};
  return fit_cart(train, opts);
}

}  // namespace fedtab

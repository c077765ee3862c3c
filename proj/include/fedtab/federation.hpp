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

// Simulated federation. Clients and server only exchange framed payloads
// through an InProcessChannel, which is also where every byte is counted.

#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <mutex>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <type_traits>
#include <variant>
#include <vector>

#include "fedtab/dataset.hpp"
#include "fedtab/error.hpp"
#include "fedtab/param_vector.hpp"
#include "fedtab/parametric.hpp"
#include "fedtab/resampling.hpp"
#include "fedtab/rng.hpp"
#include "fedtab/tree.hpp"
#include "fedtab/wire.hpp"

namespace fedtab {

// ---------------------------------------------------------------------------
// Communication ledger and transport

enum class Direction : std::uint8_t { kUp = 0, kDown = 1 };

inline std::string_view to_string(Direction d) { return d == Direction::kUp ? "up" : "down"; }

struct LedgerEntry {
  std::size_t round = 0;
  std::size_t client_id = 0;
  Direction direction = Direction::kUp;
  std::size_t bytes = 0;  // framed size on the wire
  PayloadKind payload_kind = PayloadKind::kParamVector;

  friend bool operator==(const LedgerEntry&, const LedgerEntry&) = default;
};

/// Append-only, thread-safe record of every transmitted frame.
class CommLedger {
 public:
  CommLedger() = default;
  CommLedger(const CommLedger& other) : entries_(other.entries()) {}
  CommLedger& operator=(const CommLedger& other) {
    if (this != &other) {
      auto copy = other.entries();
      std::lock_guard lock(mu_);
      entries_ = std::move(copy);
    }
    return *this;
  }

  void append(const LedgerEntry& e) {
    std::lock_guard lock(mu_);
    entries_.push_back(e);
  }

  /// Entries in canonical order: round, client id, direction, arrival.
  std::vector<LedgerEntry> entries() const {
    std::vector<LedgerEntry> out;
    {
      std::lock_guard lock(mu_);
      out = entries_;
    }
    std::stable_sort(out.begin(), out.end(), [](const LedgerEntry& a, const LedgerEntry& b) {
      return std::tie(a.round, a.client_id, a.direction) < std::tie(b.round, b.client_id, b.direction);
    });
    return out;
  }

  std::size_t total(Direction d) const {
    std::lock_guard lock(mu_);
    std::size_t n = 0;
    for (const auto& e : entries_) {
      if (e.direction == d) n += e.bytes;
    }
    return n;
  }

  std::size_t total(Direction d, PayloadKind kind) const {
    std::lock_guard lock(mu_);
    std::size_t n = 0;
    for (const auto& e : entries_) {
      if (e.direction == d && e.payload_kind == kind) n += e.bytes;
    }
    return n;
  }

  std::size_t size() const {
    std::lock_guard lock(mu_);
    return entries_.size();
  }

 private:
  mutable std::mutex mu_;
  std::vector<LedgerEntry> entries_;
};

/// Delivers framed payloads between the server and a client, recording
/// each one. Swapping this for a socket transport leaves protocols intact.
class InProcessChannel {
 public:
  explicit InProcessChannel(CommLedger& ledger) : ledger_(ledger) {}

  Frame transmit(std::size_t round, std::size_t client_id, Direction dir, PayloadKind kind,
                 std::span<const std::uint8_t> body) {
    const Bytes wire = frame(kind, body);
    ledger_.append({round, client_id, dir, wire.size(), kind});
    return unframe(wire);
  }

  template <typename T>
  Frame send(std::size_t round, std::size_t client_id, Direction dir, PayloadKind kind, const T& payload) {
    const Bytes body = serialize(payload);
    return transmit(round, client_id, dir, kind, body);
  }

 private:
  CommLedger& ledger_;
};

// ---------------------------------------------------------------------------
// Participants and policies

struct ClientHandle {
  std::size_t id = 0;
  DataTable data;
  double size_weight = 0.0;  // |D_i| / |D|
};

inline std::vector<ClientHandle> make_clients(std::vector<DataTable> parts) {
  std::size_t total = 0;
  for (const auto& p : parts) total += p.size();
  require(total > 0, ErrorKind::kInvalidArgument, "make_clients: no rows");
  std::vector<ClientHandle> clients;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const double w = static_cast<double>(parts[i].size()) / static_cast<double>(total);
    clients.push_back({i, std::move(parts[i]), w});
  }
  return clients;
}

inline void require_clients(std::span<const ClientHandle> clients, const char* op) {
  require(clients.size() >= 2, ErrorKind::kInvalidArgument, std::string(op) + ": at least 2 clients required");
}

/// How many of a client's k trees travel: floor(sqrt(k)) or
/// max(1, round(f * k)).
struct SubsetPolicy {
  enum class Kind { kSqrtK, kFraction };
  Kind kind = Kind::kSqrtK;
  double fraction = 1.0;

  static SubsetPolicy sqrt_k() { return {Kind::kSqrtK, 1.0}; }
  static SubsetPolicy fraction_of(double f) {
    require(f > 0.0 && f <= 1.0, ErrorKind::kConfig, "subset_policy.fraction must lie in (0,1]");
    return {Kind::kFraction, f};
  }

  std::size_t subset_size(std::size_t k) const {
    if (k == 0) return 0;
    if (kind == Kind::kSqrtK) {
      return std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(k)))));
    }
    return std::clamp<std::size_t>(static_cast<std::size_t>(std::llround(fraction * static_cast<double>(k))), 1, k);
  }

  std::string describe() const {
    return kind == Kind::kSqrtK ? "sqrt_k" : "fraction(" + std::to_string(fraction) + ")";
  }
};

/// Gaussian mechanism parameters; disabled unless asked for.
struct DpConfig {
  bool enabled = false;
  double epsilon = 0.5;
  double delta = 1e-5;
  double clip_norm = 1.0;

  void validate() const {
    require(epsilon > 0.0, ErrorKind::kConfig, "dp.epsilon must be > 0");
    require(delta > 0.0 && delta < 1.0, ErrorKind::kConfig, "dp.delta must lie in (0,1)");
    require(clip_norm > 0.0, ErrorKind::kConfig, "dp.clip_norm must be > 0");
  }

  /// clip_norm * sqrt(2 ln(1.25 / delta)) / epsilon.
  double noise_scale() const { return clip_norm * std::sqrt(2.0 * std::log(1.25 / delta)) / epsilon; }
};

struct AveragedParams {
  ParametricModel model;
};
struct ForestUnion {
  TreeEnsemble ensemble;
};
struct WeightedShallowTrees {
  TreeEnsemble ensemble;
};

using GlobalModel = std::variant<AveragedParams, ForestUnion, WeightedShallowTrees>;

inline int predict(const GlobalModel& model, std::span<const double> x) {
  return std::visit(
      [&](const auto& m) -> int {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, AveragedParams>) {
          return m.model.predict(x);
        } else if constexpr (std::is_same_v<M, ForestUnion>) {
          return predict_forest_vote(m.ensemble, x);
        } else {
          return predict_weighted_vote(m.ensemble, x);
        }
      },
      model);
}

struct FederationResult {
  GlobalModel model;
  /// Serialized size of each client's full local model, which the
  /// compressed protocols never send; empty for the parametric path.
  std::vector<std::size_t> local_full_bytes;
  double train_seconds = 0.0;
  double aggregate_seconds = 0.0;
};

// ---------------------------------------------------------------------------
// Aggregation

namespace detail {

inline void check_same_layout(std::span<const ParamVector> params, const char* op) {
  require(!params.empty(), ErrorKind::kInvalidArgument, std::string(op) + ": empty parameter list");
  for (const auto& p : params) {
    p.check_consistent();
    require(p.layout == params.front().layout, ErrorKind::kLayoutMismatch,
            std::string(op) + ": layout mismatch " + p.layout.describe() + " vs " +
                params.front().layout.describe());
  }
}

}  // namespace detail

/// Unweighted elementwise mean. Each coordinate is summed in sorted order,
/// so the result is bit-identical under any permutation of `params`.
inline ParamVector fedavg_aggregate(std::span<const ParamVector> params) {
  detail::check_same_layout(params, "fedavg_aggregate");
  ParamVector out = ParamVector::zeros(params.front().layout);
  std::vector<double> column(params.size());
  const double n = static_cast<double>(params.size());
  for (std::size_t j = 0; j < out.size(); ++j) {
    for (std::size_t i = 0; i < params.size(); ++i) column[i] = params[i].values[j];
    std::sort(column.begin(), column.end());
    double s = 0.0;
    for (double v : column) s += v;
    out.values[j] = s / n;
  }
  return out;
}

/// Size-weighted variant (sum_i w_i theta_i with sum w_i = 1).
inline ParamVector fedavg_aggregate_weighted(std::span<const ParamVector> params, std::span<const double> weights) {
  detail::check_same_layout(params, "fedavg_aggregate_weighted");
  require(weights.size() == params.size(), ErrorKind::kInvalidArgument,
          "fedavg_aggregate_weighted: one weight per vector required");
  ParamVector out = ParamVector::zeros(params.front().layout);
  for (std::size_t i = 0; i < params.size(); ++i) {
    for (std::size_t j = 0; j < out.size(); ++j) out.values[j] += weights[i] * params[i].values[j];
  }
  return out;
}

inline Standardizer average_scalers(std::span<const Standardizer> scalers) {
  require(!scalers.empty(), ErrorKind::kInvalidArgument, "average_scalers: empty list");
  Standardizer out = scalers.front();
  for (std::size_t j = 0; j < out.size(); ++j) {
    double m = 0.0, s = 0.0;
    for (const auto& sc : scalers) {
      m += sc.mean[j];
      s += sc.scale[j];
    }
    out.mean[j] = m / static_cast<double>(scalers.size());
    out.scale[j] = s / static_cast<double>(scalers.size());
  }
  return out;
}

/// Clips to L2 norm <= clip_norm, then adds i.i.d. N(0, sigma^2) with
/// sigma = clip_norm * sqrt(2 ln(1.25/delta)) / epsilon. Identity when
/// disabled.
inline ParamVector dp_gaussianize(const ParamVector& params, const DpConfig& dp, std::uint64_t seed) {
  if (!dp.enabled) return params;
  dp.validate();
  ParamVector out = params;
  const double norm = out.norm();
  if (norm > dp.clip_norm) {
    const double f = dp.clip_norm / norm;
    for (auto& v : out.values) v *= f;
  }
  const double sigma = dp.noise_scale();
  Rng rng(derive_seed(seed, {0xd9}));
  for (auto& v : out.values) v += sigma * rng.normal();
  return out;
}

// ---------------------------------------------------------------------------
// Federated SMOTE

/// Server-side view of federated SMOTE: mu_g and sigma_g^2 are unweighted
/// means of the client moments.
struct GlobalClassStats {
  std::vector<double> mu;
  std::vector<double> sigma2;
  int minority_label = 1;
};

/// The server's whole input is the list of ClassStats records; the type
/// carries no rows.
inline GlobalClassStats aggregate_class_stats(std::span<const ClassStats> stats) {
  require(!stats.empty(), ErrorKind::kInvalidArgument, "aggregate_class_stats: no clients");
  const std::size_t d = stats.front().mu.size();
  GlobalClassStats g{std::vector<double>(d, 0.0), std::vector<double>(d, 0.0), stats.front().minority_label};
  for (const auto& s : stats) {
    require(s.mu.size() == d && s.sigma2.size() == d, ErrorKind::kLayoutMismatch,
            "aggregate_class_stats: feature count mismatch");
    require(s.minority_label == g.minority_label, ErrorKind::kInvalidArgument,
            "aggregate_class_stats: clients disagree on the minority class");
    require(s.n_minority > 0, ErrorKind::kSingleClass, "aggregate_class_stats: client without minority rows");
    for (std::size_t j = 0; j < d; ++j) {
      g.mu[j] += s.mu[j];
      g.sigma2[j] += s.sigma2[j];
    }
  }
  const double n = static_cast<double>(stats.size());
  for (std::size_t j = 0; j < d; ++j) {
    g.mu[j] /= n;
    g.sigma2[j] /= n;
  }
  return g;
}

/// Client-side draw: appends rows from N(mu_g, diag(sigma_g^2)) labelled
/// with the minority class until balanced. Binary features are rounded;
/// continuous ones clamped to the client's observed column range.
inline DataTable augment_with_global_stats(const DataTable& local, const GlobalClassStats& g, std::uint64_t seed) {
  const int minority = g.minority_label;
  const std::size_t have = local.count(minority), other = local.count(1 - minority);
  require(have > 0, ErrorKind::kSingleClass, "federated SMOTE: client without minority rows");
  DataTable out = local;
  if (have >= other) return out;
  const std::size_t d = local.n_features();
  require(g.mu.size() == d, ErrorKind::kLayoutMismatch, "federated SMOTE: feature count mismatch");
  std::vector<double> lo(d, std::numeric_limits<double>::infinity()), hi(d, -std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < local.size(); ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      lo[j] = std::min(lo[j], local.at(i, j));
      hi[j] = std::max(hi[j], local.at(i, j));
    }
  }
  Rng rng(derive_seed(seed, {0xf5}));
  std::vector<double> row(d);
  for (std::size_t s = 0; s < other - have; ++s) {
    for (std::size_t j = 0; j < d; ++j) {
      double v = g.mu[j] + std::sqrt(g.sigma2[j]) * rng.normal();
      if (local.schema.kinds[j] == FeatureKind::kBinary) {
        v = v >= 0.5 ? 1.0 : 0.0;
      } else {
        v = std::clamp(v, lo[j], hi[j]);
      }
      row[j] = v;
    }
    out.add_row(row, minority);
  }
  return out;
}

/// Full federated SMOTE exchange: ClassStats up, global moments down, local
/// augmentation. Returns one balanced table per client, in client order.
inline std::vector<DataTable> federated_smote_sync(std::span<const ClientHandle> clients, std::uint64_t seed,
                                                   CommLedger* ledger = nullptr, std::size_t round = 0) {
  require(!clients.empty(), ErrorKind::kInvalidArgument, "federated_smote_sync: no clients");
  CommLedger scratch;
  InProcessChannel channel(ledger ? *ledger : scratch);

  std::vector<ClassStats> received;
  for (const auto& c : clients) {
    require(c.data.has_both_classes(), ErrorKind::kSingleClass,
            "federated_smote_sync: client " + std::to_string(c.id) + " has no minority rows");
    const auto stats = minority_class_stats(c.data);
    const auto f = channel.send(round, c.id, Direction::kUp, PayloadKind::kClassStats, stats);
    received.push_back(decode_class_stats(f.body));
  }
  const auto global = aggregate_class_stats(received);

  std::vector<DataTable> out;
  for (const auto& c : clients) {
    ClassStats down{global.mu, global.sigma2, 0, 0, global.minority_label};
    const auto f = channel.send(round, c.id, Direction::kDown, PayloadKind::kClassStats, down);
    const auto g = decode_class_stats(f.body);
    out.push_back(augment_with_global_stats(c.data, {g.mu, g.sigma2, g.minority_label},
                                            derive_seed(seed, {c.id, round})));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Parametric path

struct ParametricFederationOptions {
  std::uint64_t seed = 0;
  /// Size-weighted averaging instead of the plain mean.
  bool weighted = false;
  std::size_t smote_neighbors = kDefaultSmoteNeighbors;
};

namespace detail {

using Clock = std::chrono::steady_clock;

inline double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

inline DataTable local_resample(const ClientHandle& c, SamplingStrategy sampling, std::uint64_t seed,
                                std::size_t smote_neighbors) {
  try {
    return apply_sampling(c.data, sampling, seed, smote_neighbors);
  } catch (const Error& e) {
    throw Error(e.kind(), "client " + std::to_string(c.id) + ": " + e.what());
  }
}

inline void require_trainable(const ClientHandle& c, const DataTable& t) {
  require(t.has_both_classes(), ErrorKind::kSingleClass,
          "client " + std::to_string(c.id) + ": single-class data after resampling");
}

}  // namespace detail

/// FedAvg/FedProx. Round 0 agrees on a shared standardization (client
/// column statistics up, their mean down) and, for federated SMOTE, the
/// minority moments. Each round r = 1..rounds then broadcasts theta_global,
/// lets every client resample and train from it (the network also uses it
/// as its proximal anchor), collects theta_i and averages them, adding
/// Gaussian noise when DP is enabled.
inline FederationResult run_parametric_federation(std::span<const ClientHandle> clients, ModelKind kind,
                                                  std::size_t rounds, const ParametricConfig& local_config,
                                                  SamplingStrategy sampling, const DpConfig& dp,
                                                  CommLedger& ledger,
                                                  const ParametricFederationOptions& options = {}) {
  require_clients(clients, "run_parametric_federation");
  require(rounds >= 1, ErrorKind::kInvalidArgument, "run_parametric_federation: rounds must be >= 1");
  if (dp.enabled) dp.validate();
  InProcessChannel channel(ledger);
  FederationResult result;
  const std::size_t d = clients.front().data.n_features();

  // Round 0: shared standardization.
  std::vector<Standardizer> scalers;
  for (const auto& c : clients) {
    const auto f = channel.send(0, c.id, Direction::kUp, PayloadKind::kScalerStats, Standardizer::fit(c.data));
    scalers.push_back(decode_standardizer(f.body));
  }
  const auto global_scaler = average_scalers(scalers);
  std::vector<Standardizer> client_scalers;
  for (const auto& c : clients) {
    const auto f = channel.send(0, c.id, Direction::kDown, PayloadKind::kScalerStats, global_scaler);
    client_scalers.push_back(decode_standardizer(f.body));
  }

  std::vector<DataTable> synced;
  if (sampling == SamplingStrategy::kFederatedSmote) synced = federated_smote_sync(clients, options.seed, &ledger, 0);

  const auto layout = layout_for(kind, d, local_config);
  ParamVector global = initial_params(kind, d, local_config, options.seed);
  std::vector<double> weights;
  for (const auto& c : clients) weights.push_back(c.size_weight);

  for (std::size_t round = 1; round <= rounds; ++round) {
    std::vector<ParamVector> uploads;
    const auto t_train = detail::Clock::now();
    for (std::size_t i = 0; i < clients.size(); ++i) {
      const auto& c = clients[i];
      const auto down = channel.send(round, c.id, Direction::kDown, PayloadKind::kParamVector, global);
      const ParamVector theta_global = decode_param_vector(down.body, layout);

      const auto seed = derive_seed(options.seed, {c.id, round});
      DataTable local = sampling == SamplingStrategy::kFederatedSmote
                            ? synced[i]
                            : detail::local_resample(c, sampling, seed, options.smote_neighbors);
      detail::require_trainable(c, local);
      local = client_scalers[i].transform(local);

      ParametricConfig cfg = local_config;
      cfg.nn.seed = derive_seed(seed, {0x77});
      ParamVector theta;
      try {
        theta = train_parametric(kind, local, cfg, theta_global, theta_global);
      } catch (const Error& e) {
        throw Error(e.kind(), "client " + std::to_string(c.id) + ", round " + std::to_string(round) + ": " + e.what());
      }
      const auto up = channel.send(round, c.id, Direction::kUp, PayloadKind::kParamVector, theta);
      uploads.push_back(decode_param_vector(up.body, layout));
    }
    result.train_seconds += detail::seconds_since(t_train);

    const auto t_agg = detail::Clock::now();
    global = options.weighted ? fedavg_aggregate_weighted(uploads, weights) : fedavg_aggregate(uploads);
    global = dp_gaussianize(global, dp, derive_seed(options.seed, {0xd0, round}));
    result.aggregate_seconds += detail::seconds_since(t_agg);
  }

  result.model = AveragedParams{ParametricModel{kind, global_scaler, global, local_config.svm}};
  return result;
}

// ---------------------------------------------------------------------------
// Tree paths

/// Uniformly samples s trees without replacement; selected trees keep their
/// original relative order.
inline TreeEnsemble tree_subset_select(const TreeEnsemble& forest, const SubsetPolicy& policy, std::uint64_t seed) {
  require_kind(forest, EnsembleKind::kForestVote, "tree_subset_select");
  require(!forest.trees.empty(), ErrorKind::kInvalidArgument, "tree_subset_select: empty forest");
  const std::size_t k = forest.trees.size();
  const std::size_t s = policy.subset_size(k);
  std::vector<std::size_t> idx(k);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(derive_seed(seed, {0x5e1}));
  for (std::size_t i = 0; i < s; ++i) std::swap(idx[i], idx[i + rng.index(k - i)]);
  idx.resize(s);
  std::sort(idx.begin(), idx.end());
  TreeEnsemble out;
  out.kind = EnsembleKind::kForestVote;
  out.n_features = forest.n_features;
  for (auto i : idx) out.trees.push_back(forest.trees[i]);
  return out;
}

namespace detail {

inline std::vector<DataTable> prepare_tree_data(std::span<const ClientHandle> clients, SamplingStrategy sampling,
                                                std::uint64_t seed, CommLedger& ledger) {
  if (sampling == SamplingStrategy::kFederatedSmote) return federated_smote_sync(clients, seed, &ledger, 0);
  std::vector<DataTable> out;
  for (const auto& c : clients) {
    out.push_back(local_resample(c, sampling, derive_seed(seed, {c.id, 1}), kDefaultSmoteNeighbors));
  }
  return out;
}

}  // namespace detail

/// Single round: every client fits k trees, uploads an s-subset, and the
/// server takes the union, predicting by majority vote.
inline FederationResult run_forest_federation(std::span<const ClientHandle> clients, const ForestConfig& forest_config,
                                              const SubsetPolicy& policy, SamplingStrategy sampling,
                                              CommLedger& ledger, std::uint64_t seed = 0) {
  require_clients(clients, "run_forest_federation");
  forest_config.validate();
  InProcessChannel channel(ledger);
  FederationResult result;
  const auto t_train = detail::Clock::now();
  const auto local = detail::prepare_tree_data(clients, sampling, seed, ledger);

  std::vector<TreeEnsemble> received;
  for (std::size_t i = 0; i < clients.size(); ++i) {
    const auto& c = clients[i];
    ForestConfig cfg = forest_config;
    cfg.seed = derive_seed(seed, {c.id, 0xf0});
    const auto forest = fit_random_forest(local[i], cfg);
    result.local_full_bytes.push_back(ledger_bytes(forest));
    const auto subset = tree_subset_select(forest, policy, derive_seed(seed, {c.id, 0x5b}));
    const auto f = channel.send(1, c.id, Direction::kUp, PayloadKind::kForestEnsemble, subset);
    received.push_back(decode_ensemble(f.body, EnsembleKind::kForestVote));
  }
  result.train_seconds = detail::seconds_since(t_train);

  const auto t_agg = detail::Clock::now();
  TreeEnsemble global;
  global.kind = EnsembleKind::kForestVote;
  global.n_features = clients.front().data.n_features();
  for (auto& e : received) {
    for (auto& t : e.trees) global.trees.push_back(std::move(t));
  }
  result.aggregate_seconds = detail::seconds_since(t_agg);
  result.model = ForestUnion{std::move(global)};
  return result;
}

/// Each client fits a full boosted model, ranks features by total gain,
/// fits one CART of depth `shallow_depth` on its top-p features and uploads
/// only that tree. The server weights tree i by |D_i| / |D|.
inline FederationResult run_xgb_feature_extraction(std::span<const ClientHandle> clients, const GbtConfig& gbt_config,
                                                   std::size_t p, std::size_t shallow_depth,
                                                   SamplingStrategy sampling, CommLedger& ledger,
                                                   std::uint64_t seed = 0) {
  require_clients(clients, "run_xgb_feature_extraction");
  require(p >= 1, ErrorKind::kInvalidArgument, "run_xgb_feature_extraction: p must be >= 1");
  gbt_config.validate();
  InProcessChannel channel(ledger);
  FederationResult result;
  const auto t_train = detail::Clock::now();
  const auto local = detail::prepare_tree_data(clients, sampling, seed, ledger);

  TreeEnsemble global;
  global.kind = EnsembleKind::kWeightedVote;
  global.n_features = clients.front().data.n_features();
  for (std::size_t i = 0; i < clients.size(); ++i) {
    const auto& c = clients[i];
    detail::require_trainable(c, local[i]);
    GbtConfig cfg = gbt_config;
    cfg.seed = derive_seed(seed, {c.id, 0x6b});
    const auto gbt = fit_gbt(local[i], cfg);
    result.local_full_bytes.push_back(ledger_bytes(gbt));
    const auto importance = gbt_feature_importance(gbt, local[i].n_features());
    const auto shallow = fit_top_p_tree(local[i], importance, std::min(p, local[i].n_features()), shallow_depth);
    const auto f = channel.send(1, c.id, Direction::kUp, PayloadKind::kTree, shallow);
    global.trees.push_back(decode_tree(f.body));
    global.weights.push_back(c.size_weight);
  }
  result.train_seconds = detail::seconds_since(t_train);
  global.validate();
  result.model = WeightedShallowTrees{std::move(global)};
  return result;
}

}  // namespace fedtab

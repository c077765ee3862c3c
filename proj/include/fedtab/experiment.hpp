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

// Config-driven experiment runner: JSON config in, deterministic JSON and
// CSV reports out. Wall-clock timings go to a separate sidecar so that the
// main report is byte-stable across invocations.

#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "fedtab/dataset.hpp"
#include "fedtab/error.hpp"
#include "fedtab/federation.hpp"
#include "fedtab/metrics.hpp"
#include "fedtab/parametric.hpp"
#include "fedtab/resampling.hpp"
#include "fedtab/synthetic.hpp"
#include "fedtab/tree.hpp"

namespace fedtab {

using Json = nlohmann::ordered_json;

enum class ModelChoice { kLogistic, kSvm, kNn, kForest, kGbt };
enum class Mode { kCentralized, kFederated };
/// `kSmote` resolves to local SMOTE when centralized and federated SMOTE
/// when federated.
enum class SamplingRequest { kNone, kRos, kRus, kSmote, kLocalSmote, kFederatedSmote };

inline std::string_view to_string(ModelChoice m) {
  switch (m) {
    case ModelChoice::kLogistic: return "logistic";
    case ModelChoice::kSvm: return "svm";
    case ModelChoice::kNn: return "nn";
    case ModelChoice::kForest: return "forest";
    case ModelChoice::kGbt: return "gbt";
  }
  return "?";
}

inline std::string_view to_string(Mode m) { return m == Mode::kCentralized ? "centralized" : "federated"; }

inline std::string_view to_string(SamplingRequest s) {
  switch (s) {
    case SamplingRequest::kNone: return "none";
    case SamplingRequest::kRos: return "ros";
    case SamplingRequest::kRus: return "rus";
    case SamplingRequest::kSmote: return "smote";
    case SamplingRequest::kLocalSmote: return "local_smote";
    case SamplingRequest::kFederatedSmote: return "federated_smote";
  }
  return "?";
}

inline SamplingStrategy resolve_sampling(SamplingRequest s, Mode mode) {
  switch (s) {
    case SamplingRequest::kNone: return SamplingStrategy::kNone;
    case SamplingRequest::kRos: return SamplingStrategy::kRos;
    case SamplingRequest::kRus: return SamplingStrategy::kRus;
    case SamplingRequest::kSmote:
      return mode == Mode::kCentralized ? SamplingStrategy::kLocalSmote : SamplingStrategy::kFederatedSmote;
    case SamplingRequest::kLocalSmote: return SamplingStrategy::kLocalSmote;
    case SamplingRequest::kFederatedSmote: return SamplingStrategy::kFederatedSmote;
  }
  return SamplingStrategy::kNone;
}

inline bool is_parametric(ModelChoice m) {
  return m == ModelChoice::kLogistic || m == ModelChoice::kSvm || m == ModelChoice::kNn;
}

inline ModelKind parametric_kind(ModelChoice m) {
  switch (m) {
    case ModelChoice::kSvm: return ModelKind::kSvm;
    case ModelChoice::kNn: return ModelKind::kNeuralNet;
    default: return ModelKind::kLogistic;
  }
}

struct Hyperparameters {
  ParametricConfig parametric;
  /// FedProx for the network in federated mode.
  bool nn_fedprox = true;
  double nn_prox_mu = kDefaultFedProxMu;
  ForestConfig forest;
  GbtConfig gbt;
  std::size_t shallow_depth = 4;
};

struct ExperimentConfig {
  std::string dataset_path;
  std::optional<SyntheticConfig> synthetic;
  bool framingham_schema_selected = true;
  FeatureSchema schema = framingham_schema();
  MissingPolicy missing = MissingPolicy::kImpute;
  std::size_t n_clients = 3;
  double test_fraction = 0.2;
  ModelChoice model = ModelChoice::kLogistic;
  Mode mode = Mode::kFederated;
  SamplingRequest sampling = SamplingRequest::kNone;
  std::size_t rounds = 20;
  std::optional<SubsetPolicy> subset_policy;
  std::optional<std::size_t> p_top;
  DpConfig dp;
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  std::string output_path;
  bool weighted_aggregation = false;
  Hyperparameters hyper;

  SubsetPolicy effective_subset_policy() const { return subset_policy.value_or(SubsetPolicy::sqrt_k()); }
  std::size_t effective_p_top() const { return p_top.value_or(8); }
  SamplingStrategy strategy() const { return resolve_sampling(sampling, mode); }

  void validate() const {
    const auto check = [](bool ok, const std::string& msg) { require(ok, ErrorKind::kConfig, "config." + msg); };
    check(dataset_path.empty() != !synthetic.has_value(),
          "dataset_path: exactly one of dataset_path or synthetic must be given");
    if (synthetic) synthetic->validate();
    schema.validate();
    check(test_fraction > 0.0 && test_fraction < 1.0, "test_fraction: must lie in (0,1)");
    if (mode == Mode::kFederated) check(n_clients >= 2, "n_clients: federated mode requires at least 2 clients");
    check(rounds >= 1, "rounds: must be >= 1");
    check(!seeds.empty(), "seeds: at least one seed required");
    check(std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() == seeds.size(), "seeds: duplicate seed");
    check(!subset_policy || model == ModelChoice::kForest, "subset_policy: only valid with model=forest");
    check(!p_top || model == ModelChoice::kGbt, "p_top: only valid with model=gbt");
    if (p_top) check(*p_top >= 1 && *p_top <= schema.size(), "p_top: must lie in [1, number of features]");
    check(!(mode == Mode::kCentralized && sampling == SamplingRequest::kFederatedSmote),
          "sampling: federated_smote requires mode=federated");
    check(hyper.shallow_depth >= 1, "gbt.shallow_depth: must be >= 1");
    check(hyper.nn_prox_mu >= 0.0, "nn.prox_mu: must be >= 0");
    if (dp.enabled) {
      check(is_parametric(model) && mode == Mode::kFederated,
            "dp.enabled: noise applies only to federated parametric models");
      dp.validate();
    }
    hyper.parametric.logistic.validate();
    hyper.parametric.svm.validate();
    hyper.parametric.nn.validate();
    hyper.forest.validate();
    hyper.gbt.validate();
  }
};

// ---------------------------------------------------------------------------
// JSON <-> config

namespace detail {

/// Reads fields of one JSON object, rejecting unknown keys and reporting
/// type errors with the full field path.
class FieldReader {
 public:
  FieldReader(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    require(j.is_object(), ErrorKind::kConfig, path_ + ": expected an object");
  }

  const Json* find(const std::string& key) {
    auto it = j_.find(key);
    if (it == j_.end()) return nullptr;
    seen_.insert(key);
    return &*it;
  }

  std::string field(const std::string& key) const { return path_ + "." + key; }

  [[noreturn]] void type_error(const std::string& key, const char* expected) const {
    fail(ErrorKind::kConfig, field(key) + ": expected " + expected);
  }

  bool read(const std::string& key, double& out) {
    const Json* v = find(key);
    if (!v) return false;
    if (!v->is_number()) type_error(key, "a number");
    out = v->get<double>();
    return true;
  }

  bool read(const std::string& key, std::size_t& out) {
    const Json* v = find(key);
    if (!v) return false;
    if (!v->is_number_integer() || (!v->is_number_unsigned() && v->get<std::int64_t>() < 0)) {
      type_error(key, "a non-negative integer");
    }
    out = v->get<std::size_t>();
    return true;
  }

  bool read(const std::string& key, int& out) {
    std::size_t v = 0;
    if (!read(key, v)) return false;
    out = static_cast<int>(v);
    return true;
  }

  bool read(const std::string& key, bool& out) {
    const Json* v = find(key);
    if (!v) return false;
    if (!v->is_boolean()) type_error(key, "true or false");
    out = v->get<bool>();
    return true;
  }

  bool read(const std::string& key, std::string& out) {
    const Json* v = find(key);
    if (!v) return false;
    if (!v->is_string()) type_error(key, "a string");
    out = v->get<std::string>();
    return true;
  }

  template <typename Enum, std::size_t N>
  bool read_enum(const std::string& key, Enum& out, const std::pair<const char*, Enum> (&names)[N]) {
    std::string s;
    if (!read(key, s)) return false;
    for (const auto& [name, value] : names) {
      if (s == name) {
        out = value;
        return true;
      }
    }
    std::string allowed;
    for (const auto& [name, value] : names) allowed += (allowed.empty() ? "" : "|") + std::string(name);
    fail(ErrorKind::kConfig, field(key) + ": unknown value '" + s + "' (expected " + allowed + ")");
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) fail(ErrorKind::kConfig, field(it.key()) + ": unknown field");
    }
  }

 private:
  const Json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

inline constexpr std::pair<const char*, ModelChoice> kModelNames[] = {
    {"logistic", ModelChoice::kLogistic}, {"svm", ModelChoice::kSvm},       {"nn", ModelChoice::kNn},
    {"forest", ModelChoice::kForest},     {"gbt", ModelChoice::kGbt},
};
inline constexpr std::pair<const char*, Mode> kModeNames[] = {
    {"centralized", Mode::kCentralized},
    {"federated", Mode::kFederated},
};
inline constexpr std::pair<const char*, SamplingRequest> kSamplingNames[] = {
    {"none", SamplingRequest::kNone},
    {"ros", SamplingRequest::kRos},
    {"rus", SamplingRequest::kRus},
    {"smote", SamplingRequest::kSmote},
    {"local_smote", SamplingRequest::kLocalSmote},
    {"federated_smote", SamplingRequest::kFederatedSmote},
};
inline constexpr std::pair<const char*, MissingPolicy> kMissingNames[] = {
    {"impute", MissingPolicy::kImpute},
    {"drop", MissingPolicy::kDrop},
};
inline constexpr std::pair<const char*, FeatureKind> kKindNames[] = {
    {"continuous", FeatureKind::kContinuous},
    {"binary", FeatureKind::kBinary},
};

template <typename Enum, std::size_t N>
Enum parse_enum_value(const Json& v, const std::string& path, const std::pair<const char*, Enum> (&names)[N]) {
  require(v.is_string(), ErrorKind::kConfig, path + ": expected a string");
  for (const auto& [name, value] : names) {
    if (v.get<std::string>() == name) return value;
  }
  fail(ErrorKind::kConfig, path + ": unknown value '" + v.get<std::string>() + "'");
}

inline FeatureSchema parse_schema(const Json& j, const std::string& path, bool& is_framingham) {
  if (j.is_string()) {
    require(j.get<std::string>() == "framingham", ErrorKind::kConfig,
            path + ": unknown schema '" + j.get<std::string>() + "' (expected framingham or an object)");
    is_framingham = true;
    return framingham_schema();
  }
  FieldReader r(j, path);
  FeatureSchema s;
  is_framingham = false;
  const Json* features = r.find("features");
  require(features && features->is_array() && !features->empty(), ErrorKind::kConfig,
          path + ".features: expected a non-empty array");
  for (std::size_t i = 0; i < features->size(); ++i) {
    const std::string fpath = path + ".features[" + std::to_string(i) + "]";
    FieldReader f((*features)[i], fpath);
    std::string name;
    FeatureKind kind = FeatureKind::kContinuous;
    require(f.read("name", name), ErrorKind::kConfig, fpath + ".name: required");
    f.read_enum("kind", kind, kKindNames);
    f.finish();
    s.names.push_back(name);
    s.kinds.push_back(kind);
  }
  r.read("label", s.label_name);
  r.finish();
  return s;
}

inline SubsetPolicy parse_subset_policy(const Json& j, const std::string& path) {
  if (j.is_string()) {
    require(j.get<std::string>() == "sqrt_k", ErrorKind::kConfig,
            path + ": expected \"sqrt_k\" or {\"fraction\": f}");
    return SubsetPolicy::sqrt_k();
  }
  FieldReader r(j, path);
  double f = 0.0;
  require(r.read("fraction", f), ErrorKind::kConfig, path + ".fraction: required");
  r.finish();
  require(f > 0.0 && f <= 1.0, ErrorKind::kConfig, path + ".fraction: must lie in (0,1]");
  return SubsetPolicy::fraction_of(f);
}

inline void parse_hyper(FieldReader& top, Hyperparameters& h) {
  if (const Json* j = top.find("logistic")) {
    FieldReader r(*j, top.field("logistic"));
    r.read("l2_lambda", h.parametric.logistic.l2_lambda);
    r.read("max_iter", h.parametric.logistic.max_iter);
    r.read("tolerance", h.parametric.logistic.tolerance);
    r.finish();
  }
  if (const Json* j = top.find("svm")) {
    FieldReader r(*j, top.field("svm"));
    r.read("degree", h.parametric.svm.degree);
    r.read("c", h.parametric.svm.c);
    r.read("epochs", h.parametric.svm.epochs);
    r.read("learning_rate", h.parametric.svm.learning_rate);
    r.read("gamma", h.parametric.svm.gamma);
    r.finish();
  }
  if (const Json* j = top.find("nn")) {
    FieldReader r(*j, top.field("nn"));
    r.read("hidden_units", h.parametric.nn.hidden_units);
    r.read("epochs", h.parametric.nn.epochs);
    r.read("learning_rate", h.parametric.nn.learning_rate);
    r.read("batch_size", h.parametric.nn.batch_size);
    r.read("fedprox", h.nn_fedprox);
    r.read("prox_mu", h.nn_prox_mu);
    r.finish();
  }
  if (const Json* j = top.find("forest")) {
    FieldReader r(*j, top.field("forest"));
    r.read("n_trees", h.forest.n_trees);
    r.read("max_depth", h.forest.max_depth);
    r.read("min_samples_split", h.forest.min_samples_split);
    if (const Json* f = r.find("features_per_split")) {
      if (f->is_string() && f->get<std::string>() == "sqrt") {
        h.forest.features_per_split = kSqrtFeatures;
      } else if (f->is_number_unsigned()) {
        h.forest.features_per_split = f->get<std::size_t>();
      } else {
        r.type_error("features_per_split", "\"sqrt\" or a non-negative integer (0 = all)");
      }
    }
    r.read("bootstrap", h.forest.bootstrap);
    r.finish();
  }
  if (const Json* j = top.find("gbt")) {
    FieldReader r(*j, top.field("gbt"));
    r.read("n_rounds", h.gbt.n_rounds);
    r.read("learning_rate", h.gbt.learning_rate);
    r.read("max_depth", h.gbt.max_depth);
    r.read("reg_lambda", h.gbt.reg_lambda);
    r.read("min_child_weight", h.gbt.min_child_weight);
    r.read("subsample", h.gbt.subsample);
    r.read("shallow_depth", h.shallow_depth);
    r.finish();
  }
}

/// Parses every ExperimentConfig field present in `top`, leaving others at
/// their defaults. The caller decides which extra keys are allowed.
inline void parse_config_fields(FieldReader& top, ExperimentConfig& c) {
  top.read("dataset_path", c.dataset_path);
  if (const Json* j = top.find("synthetic")) {
    FieldReader r(*j, top.field("synthetic"));
    SyntheticConfig s;
    r.read("rows", s.rows);
    r.read("positive_rate", s.positive_rate);
    r.read("signal", s.signal);
    std::size_t seed = 0;
    if (r.read("seed", seed)) s.seed = seed;
    r.finish();
    c.synthetic = s;
  }
  if (const Json* j = top.find("schema")) c.schema = parse_schema(*j, top.field("schema"), c.framingham_schema_selected);
  top.read_enum("missing", c.missing, kMissingNames);
  top.read("n_clients", c.n_clients);
  top.read("test_fraction", c.test_fraction);
  top.read_enum("model", c.model, kModelNames);
  top.read_enum("mode", c.mode, kModeNames);
  top.read_enum("sampling", c.sampling, kSamplingNames);
  top.read("rounds", c.rounds);
  if (const Json* j = top.find("subset_policy")) c.subset_policy = parse_subset_policy(*j, top.field("subset_policy"));
  std::size_t p = 0;
  if (top.read("p_top", p)) c.p_top = p;
  if (const Json* j = top.find("dp")) {
    FieldReader r(*j, top.field("dp"));
    r.read("enabled", c.dp.enabled);
    r.read("epsilon", c.dp.epsilon);
    r.read("delta", c.dp.delta);
    r.read("clip_norm", c.dp.clip_norm);
    r.finish();
  }
  if (const Json* j = top.find("seeds")) {
    require(j->is_array(), ErrorKind::kConfig, top.field("seeds") + ": expected an array of integers");
    c.seeds.clear();
    for (const auto& s : *j) {
      require(s.is_number_integer() && (s.is_number_unsigned() || s.get<std::int64_t>() >= 0), ErrorKind::kConfig,
              top.field("seeds") + ": expected non-negative integers");
      c.seeds.push_back(s.get<std::uint64_t>());
    }
  }
  top.read("output_path", c.output_path);
  top.read("weighted_aggregation", c.weighted_aggregation);
  parse_hyper(top, c.hyper);
}

}  // namespace detail

inline ExperimentConfig parse_config(const Json& j) {
  detail::FieldReader top(j, "config");
  ExperimentConfig c;
  detail::parse_config_fields(top, c);
  top.finish();
  c.validate();
  return c;
}

/// Fully explicit form of a config; parse_config(config_to_json(c)) yields
/// an equivalent config.
inline Json config_to_json(const ExperimentConfig& c) {
  Json j;
  if (c.synthetic) {
    j["synthetic"] = {{"rows", c.synthetic->rows},
                      {"positive_rate", c.synthetic->positive_rate},
                      {"signal", c.synthetic->signal},
                      {"seed", c.synthetic->seed}};
  } else {
    j["dataset_path"] = c.dataset_path;
  }
  if (c.framingham_schema_selected) {
    j["schema"] = "framingham";
  } else {
    Json features = Json::array();
    for (std::size_t i = 0; i < c.schema.size(); ++i) {
      features.push_back({{"name", c.schema.names[i]},
                          {"kind", c.schema.kinds[i] == FeatureKind::kBinary ? "binary" : "continuous"}});
    }
    j["schema"] = {{"features", features}, {"label", c.schema.label_name}};
  }
  j["missing"] = c.missing == MissingPolicy::kImpute ? "impute" : "drop";
  j["n_clients"] = c.n_clients;
  j["test_fraction"] = c.test_fraction;
  j["model"] = to_string(c.model);
  j["mode"] = to_string(c.mode);
  j["sampling"] = to_string(c.strategy());
  j["rounds"] = c.rounds;
  if (c.model == ModelChoice::kForest) {
    const auto p = c.effective_subset_policy();
    j["subset_policy"] = p.kind == SubsetPolicy::Kind::kSqrtK ? Json("sqrt_k") : Json{{"fraction", p.fraction}};
  }
  if (c.model == ModelChoice::kGbt) j["p_top"] = c.effective_p_top();
  j["dp"] = {{"enabled", c.dp.enabled}, {"epsilon", c.dp.epsilon}, {"delta", c.dp.delta}, {"clip_norm", c.dp.clip_norm}};
  j["seeds"] = c.seeds;
  j["output_path"] = c.output_path;
  j["weighted_aggregation"] = c.weighted_aggregation;
  const auto& h = c.hyper;
  switch (c.model) {
    case ModelChoice::kLogistic:
      j["logistic"] = {{"l2_lambda", h.parametric.logistic.l2_lambda},
                       {"max_iter", h.parametric.logistic.max_iter},
                       {"tolerance", h.parametric.logistic.tolerance}};
      break;
    case ModelChoice::kSvm:
      j["svm"] = {{"degree", h.parametric.svm.degree},
                  {"c", h.parametric.svm.c},
                  {"epochs", h.parametric.svm.epochs},
                  {"learning_rate", h.parametric.svm.learning_rate},
                  {"gamma", h.parametric.svm.gamma}};
      break;
    case ModelChoice::kNn:
      j["nn"] = {{"hidden_units", h.parametric.nn.hidden_units},
                 {"epochs", h.parametric.nn.epochs},
                 {"learning_rate", h.parametric.nn.learning_rate},
                 {"batch_size", h.parametric.nn.batch_size},
                 {"fedprox", h.nn_fedprox},
                 {"prox_mu", h.nn_prox_mu}};
      break;
    case ModelChoice::kForest:
      j["forest"] = {{"n_trees", h.forest.n_trees},
                     {"max_depth", h.forest.max_depth},
                     {"min_samples_split", h.forest.min_samples_split},
                     {"features_per_split", h.forest.features_per_split == kSqrtFeatures
                                                ? Json("sqrt")
                                                : Json(h.forest.features_per_split)},
                     {"bootstrap", h.forest.bootstrap}};
      break;
    case ModelChoice::kGbt:
      j["gbt"] = {{"n_rounds", h.gbt.n_rounds},
                  {"learning_rate", h.gbt.learning_rate},
                  {"max_depth", h.gbt.max_depth},
                  {"reg_lambda", h.gbt.reg_lambda},
                  {"min_child_weight", h.gbt.min_child_weight},
                  {"subsample", h.gbt.subsample},
                  {"shallow_depth", h.shallow_depth}};
      break;
  }
  return j;
}

inline Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorKind::kIo, "cannot open config file '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorKind::kParse, "config file '" + path + "': " + e.what());
  }
}

/// FEDTAB_DATASET and FEDTAB_OUTPUT override dataset_path and output_path.
inline void apply_env_overrides(ExperimentConfig& c) {
  if (const char* d = std::getenv("FEDTAB_DATASET"); d && *d) {
    c.dataset_path = d;
    c.synthetic.reset();
  }
  if (const char* o = std::getenv("FEDTAB_OUTPUT"); o && *o) c.output_path = o;
}

inline ExperimentConfig load_config_file(const std::string& path) {
  const Json j = read_json_file(path);
  detail::FieldReader top(j, "config");
  ExperimentConfig c;
  detail::parse_config_fields(top, c);
  top.finish();
  apply_env_overrides(c);
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------
// Running

struct DatasetInfo {
  std::string source;
  std::size_t rows = 0;
  double positive_rate = 0.0;
  std::uint64_t fingerprint = 0;
};

inline DataTable load_dataset(const ExperimentConfig& c, DatasetInfo* info = nullptr) {
  DataTable data;
  std::string source;
  if (c.synthetic) {
    data = make_synthetic_framingham(*c.synthetic);
    source = "synthetic";
  } else {
    CsvOptions opts = c.framingham_schema_selected ? framingham_csv_options() : CsvOptions{};
    opts.missing = c.missing;
    data = load_csv(c.dataset_path, c.schema, opts);
    source = c.dataset_path;
  }
  require_both_classes(data, "load_dataset");
  if (info) *info = {source, data.size(), data.positive_rate(), data.fingerprint()};
  return data;
}

struct RunRecord {
  std::string model;
  std::string sampling;
  std::string mode;
  std::uint64_t seed = 0;
  std::optional<MetricsReport> metrics;
  std::size_t up_bytes = 0;
  std::size_t down_bytes = 0;
  /// Tree paths: trees in the global model, and the serialized size of the
  /// full local models that stayed on the clients.
  std::size_t global_trees = 0;
  std::size_t local_full_bytes = 0;
  std::string subset_policy;
  std::optional<std::string> error;
  double train_seconds = 0.0;
  double aggregate_seconds = 0.0;
};

namespace detail {

template <typename Predict>
MetricsReport evaluate(const DataTable& test, Predict&& predict) {
  std::vector<int> preds(test.size());
  for (std::size_t i = 0; i < test.size(); ++i) preds[i] = predict(test.row(i));
  return metrics_from(confusion(preds, test.labels));
}

inline RunRecord run_centralized(const ExperimentConfig& c, const DataTable& train, const DataTable& test,
                                 std::uint64_t seed, RunRecord rec) {
  const auto t0 = Clock::now();
  const DataTable resampled = apply_sampling(train, c.strategy(), derive_seed(seed, {0xce}));
  require_both_classes(resampled, "centralized training");
  if (is_parametric(c.model)) {
    const auto kind = parametric_kind(c.model);
    ParametricConfig cfg = c.hyper.parametric;
    cfg.nn.seed = derive_seed(seed, {0x77});
    cfg.nn.prox_mu = 0.0;
    const auto scaler = Standardizer::fit(train);
    const auto init = initial_params(kind, train.n_features(), cfg, seed);
    const ParametricModel model{kind, scaler, train_parametric(kind, scaler.transform(resampled), cfg, init), cfg.svm};
    rec.train_seconds = seconds_since(t0);
    rec.metrics = evaluate(test, [&](auto x) { return model.predict(x); });
  } else if (c.model == ModelChoice::kForest) {
    ForestConfig cfg = c.hyper.forest;
    cfg.seed = derive_seed(seed, {0xf0});
    const auto forest = fit_random_forest(resampled, cfg);
    rec.train_seconds = seconds_since(t0);
    rec.global_trees = forest.trees.size();
    rec.metrics = evaluate(test, [&](auto x) { return predict_forest_vote(forest, x); });
  } else {
    GbtConfig cfg = c.hyper.gbt;
    cfg.seed = derive_seed(seed, {0x6b});
    const auto gbt = fit_gbt(resampled, cfg);
    rec.train_seconds = seconds_since(t0);
    rec.global_trees = gbt.trees.size();
    rec.metrics = evaluate(test, [&](auto x) { return predict_gbt(gbt, x) >= 0.5 ? 1 : 0; });
  }
  return rec;
}

inline RunRecord run_federated(const ExperimentConfig& c, const DataTable& train, const DataTable& test,
                               std::uint64_t seed, RunRecord rec) {
  const auto clients = make_clients(partition_clients(train, c.n_clients, seed));
  CommLedger ledger;
  FederationResult result;
  if (is_parametric(c.model)) {
    ParametricConfig cfg = c.hyper.parametric;
    cfg.nn.prox_mu = c.hyper.nn_fedprox ? c.hyper.nn_prox_mu : 0.0;
    ParametricFederationOptions opts;
    opts.seed = seed;
    opts.weighted = c.weighted_aggregation;
    result = run_parametric_federation(clients, parametric_kind(c.model), c.rounds, cfg, c.strategy(), c.dp, ledger,
                                       opts);
  } else if (c.model == ModelChoice::kForest) {
    const auto policy = c.effective_subset_policy();
    result = run_forest_federation(clients, c.hyper.forest, policy, c.strategy(), ledger, seed);
    rec.global_trees = std::get<ForestUnion>(result.model).ensemble.trees.size();
    rec.subset_policy = policy.describe();
  } else {
    result = run_xgb_feature_extraction(clients, c.hyper.gbt, c.effective_p_top(), c.hyper.shallow_depth,
                                        c.strategy(), ledger, seed);
    rec.global_trees = std::get<WeightedShallowTrees>(result.model).ensemble.trees.size();
  }
  rec.up_bytes = ledger.total(Direction::kUp);
  rec.down_bytes = ledger.total(Direction::kDown);
  for (auto b : result.local_full_bytes) rec.local_full_bytes += b;
  rec.train_seconds = result.train_seconds;
  rec.aggregate_seconds = result.aggregate_seconds;
  rec.metrics = evaluate(test, [&](auto x) { return predict(result.model, x); });
  return rec;
}

}  // namespace detail

/// One (config, seed) cell: split, optionally partition, resample, train,
/// aggregate and evaluate on the held-out split. Errors propagate.
inline RunRecord run_cell(const ExperimentConfig& c, const DataTable& data, std::uint64_t seed) {
  RunRecord rec;
  rec.model = std::string(to_string(c.model));
  rec.sampling = std::string(to_string(c.strategy()));
  rec.mode = std::string(to_string(c.mode));
  rec.seed = seed;
  auto [train, test] = stratified_split(data, c.test_fraction, seed);
  return c.mode == Mode::kCentralized ? detail::run_centralized(c, train, test, seed, std::move(rec))
                                      : detail::run_federated(c, train, test, seed, std::move(rec));
}

struct ExperimentReport {
  Json config;
  DatasetInfo dataset;
  std::vector<RunRecord> records;
  /// Fig.-2 style series and other sweep extras; null when absent.
  Json tradeoff_series;
};

inline ExperimentReport run(const ExperimentConfig& c) {
  c.validate();
  ExperimentReport report;
  report.config = config_to_json(c);
  const DataTable data = load_dataset(c, &report.dataset);
  for (auto seed : c.seeds) report.records.push_back(run_cell(c, data, seed));
  return report;
}

// ---------------------------------------------------------------------------
// Serialization of reports

inline Json metrics_to_json(const MetricsReport& m) {
  return {{"f1", m.f1},
          {"precision", m.precision},
          {"recall", m.recall},
          {"accuracy", m.accuracy},
          {"support_positive", m.support_positive},
          {"support_negative", m.support_negative}};
}

inline Json record_to_json(const RunRecord& r) {
  Json j{{"model", r.model}, {"sampling", r.sampling}, {"mode", r.mode}, {"seed", r.seed}};
  j["metrics"] = r.metrics ? metrics_to_json(*r.metrics) : Json(nullptr);
  j["comm"] = {{"up_bytes", r.up_bytes}, {"down_bytes", r.down_bytes}, {"total_bytes", r.up_bytes + r.down_bytes}};
  if (r.global_trees > 0) j["global_trees"] = r.global_trees;
  if (r.local_full_bytes > 0) j["local_full_bytes"] = r.local_full_bytes;
  if (!r.subset_policy.empty()) j["subset_policy"] = r.subset_policy;
  j["error"] = r.error ? Json(*r.error) : Json(nullptr);
  return j;
}

inline Json dataset_to_json(const DatasetInfo& d) {
  std::ostringstream fp;
  fp << std::hex << std::setw(16) << std::setfill('0') << d.fingerprint;
  return {{"source", d.source}, {"rows", d.rows}, {"positive_rate", d.positive_rate}, {"fingerprint", fp.str()}};
}

/// Deterministic report payload; contains no timings.
inline Json report_to_json(const ExperimentReport& r) {
  Json j;
  j["config"] = r.config;
  j["dataset"] = dataset_to_json(r.dataset);
  Json records = Json::array();
  for (const auto& rec : r.records) records.push_back(record_to_json(rec));
  j["records"] = records;
  if (!r.tradeoff_series.is_null()) j["tradeoff_series"] = r.tradeoff_series;
  return j;
}

inline Json timings_to_json(const ExperimentReport& r) {
  Json records = Json::array();
  for (const auto& rec : r.records) {
    records.push_back({{"model", rec.model},
                       {"sampling", rec.sampling},
                       {"mode", rec.mode},
                       {"seed", rec.seed},
                       {"train_seconds", rec.train_seconds},
                       {"aggregate_seconds", rec.aggregate_seconds}});
  }
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::ostringstream ts;
  ts << std::put_time(std::gmtime(&now), "%Y-%m-%dT%H:%M:%SZ");
  return {{"written_at", ts.str()}, {"records", records}};
}

/// Table-shaped summary: one row per (model, sampling, mode) cell in order
/// of first appearance, metrics averaged over the successful seeds.
inline std::string summary_csv(const ExperimentReport& r) {
  struct Acc {
    std::string model, sampling, mode;
    double f1 = 0, precision = 0, recall = 0, bytes = 0;
    std::size_t ok = 0, failed = 0;
    std::string first_error;
  };
  std::vector<Acc> cells;
  for (const auto& rec : r.records) {
    auto it = std::find_if(cells.begin(), cells.end(), [&](const Acc& a) {
      return a.model == rec.model && a.sampling == rec.sampling && a.mode == rec.mode;
    });
    if (it == cells.end()) {
      Acc a;
      a.model = rec.model;
      a.sampling = rec.sampling;
      a.mode = rec.mode;
      cells.push_back(std::move(a));
      it = cells.end() - 1;
    }
    if (rec.metrics) {
      it->f1 += rec.metrics->f1;
      it->precision += rec.metrics->precision;
      it->recall += rec.metrics->recall;
      it->bytes += static_cast<double>(rec.up_bytes + rec.down_bytes);
      ++it->ok;
    } else {
      ++it->failed;
      if (it->first_error.empty() && rec.error) it->first_error = *rec.error;
    }
  }
  const auto fmt = [](double v) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(4) << v;
    return s.str();
  };
  const auto quote = [](std::string s) {
    std::string out = "\"";
    for (char ch : s) out += ch == '"' ? std::string("\"\"") : std::string(1, ch);
    return out + "\"";
  };
  std::string out = "Model,Sampling,Mode,F1,Precision,Recall,Comm-bytes,Seeds,Failed,Error\n";
  for (const auto& a : cells) {
    const double n = a.ok > 0 ? static_cast<double>(a.ok) : 1.0;
    out += a.model + "," + a.sampling + "," + a.mode + ",";
    if (a.ok > 0) {
      out += fmt(a.f1 / n) + "," + fmt(a.precision / n) + "," + fmt(a.recall / n) + "," +
             std::to_string(static_cast<std::uint64_t>(std::llround(a.bytes / n)));
    } else {
      out += ",,,";
    }
    out += "," + std::to_string(a.ok) + "," + std::to_string(a.failed) + "," +
           (a.first_error.empty() ? "" : quote(a.first_error)) + "\n";
  }
  return out;
}

inline std::string csv_path_for(const std::string& output_path) {
  const std::string ext = ".json";
  if (output_path.size() > ext.size() && output_path.compare(output_path.size() - ext.size(), ext.size(), ext) == 0) {
    return output_path.substr(0, output_path.size() - ext.size()) + ".csv";
  }
  return output_path + ".csv";
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorKind::kIo, "cannot write '" + path + "'");
  out << text;
  require(out.good(), ErrorKind::kIo, "write failed for '" + path + "'");
}

/// Writes <path> (report JSON), its CSV summary and <path>.timings.json.
inline void write_report(const ExperimentReport& r, const std::string& path) {
  write_text(path, report_to_json(r).dump(2) + "\n");
  write_text(csv_path_for(path), summary_csv(r));
  write_text(path + ".timings.json", timings_to_json(r).dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Compare and sweep

inline constexpr double kTreeSubsetF1Bound = 0.03;

/// Per-seed pairing of two configs' runs with a paired t-test on F1.
/// Deltas are a - b.
inline Json compare(const ExperimentConfig& a, const ExperimentConfig& b) {
  auto sa = a.seeds, sb = b.seeds;
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  require(sa == sb, ErrorKind::kInvalidArgument, "compare: seed-set mismatch between the two configs");
  const auto ra = run(a), rb = run(b);
  Json pairs = Json::array();
  std::vector<double> fa, fb;
  double d_f1 = 0, d_p = 0, d_r = 0;
  for (auto seed : sa) {
    const auto find = [&](const ExperimentReport& r) {
      return *std::find_if(r.records.begin(), r.records.end(), [&](const RunRecord& x) { return x.seed == seed; });
    };
    const auto x = find(ra), y = find(rb);
    fa.push_back(x.metrics->f1);
    fb.push_back(y.metrics->f1);
    const double df1 = x.metrics->f1 - y.metrics->f1;
    const double dp = x.metrics->precision - y.metrics->precision;
    const double dr = x.metrics->recall - y.metrics->recall;
    d_f1 += df1;
    d_p += dp;
    d_r += dr;
    pairs.push_back({{"seed", seed},
                     {"f1_a", x.metrics->f1},
                     {"f1_b", y.metrics->f1},
                     {"delta_f1", df1},
                     {"delta_precision", dp},
                     {"delta_recall", dr},
                     {"bytes_a", x.up_bytes + x.down_bytes},
                     {"bytes_b", y.up_bytes + y.down_bytes}});
  }
  const double n = static_cast<double>(sa.size());
  Json j;
  j["a"] = {{"config", ra.config}, {"dataset", dataset_to_json(ra.dataset)}};
  j["b"] = {{"config", rb.config}, {"dataset", dataset_to_json(rb.dataset)}};
  j["pairs"] = pairs;
  j["mean_delta"] = {{"f1", d_f1 / n}, {"precision", d_p / n}, {"recall", d_r / n}};
  if (sa.size() >= 2) {
    const auto t = paired_t_test(fa, fb);
    j["t_test"] = {{"t_statistic", std::isfinite(t.t_statistic) ? Json(t.t_statistic)
                                                                 : Json(t.t_statistic > 0 ? "inf" : "-inf")},
                   {"degrees_of_freedom", t.degrees_of_freedom},
                   {"significant_at_0_05", t.significant_at_0_05}};
  } else {
    j["t_test"] = nullptr;
  }
  // Only meaningful for two forest runs that differ in tree-subset policy.
  if (a.model == ModelChoice::kForest && b.model == ModelChoice::kForest) {
    j["tree_subset_bound"] = {{"bound", kTreeSubsetF1Bound},
                              {"abs_mean_delta_f1", std::abs(d_f1 / n)},
                              {"within_bound", std::abs(d_f1 / n) <= kTreeSubsetF1Bound}};
  }
  return j;
}

struct SweepConfig {
  ExperimentConfig base;
  std::vector<ModelChoice> models;
  std::vector<SamplingRequest> samplings;
  std::vector<Mode> modes;
  /// Adds the three-point communication/F1 series (full forest, subset
  /// forest, boosted feature extraction).
  bool tree_series = false;
};

inline SweepConfig parse_sweep(const Json& j) {
  detail::FieldReader top(j, "config");
  SweepConfig s;
  detail::parse_config_fields(top, s.base);
  const Json* grid = top.find("grid");
  require(grid != nullptr, ErrorKind::kConfig, "config.grid: required for sweep");
  detail::FieldReader g(*grid, "config.grid");
  const auto list = [&](const char* key, auto& out, const auto& names) {
    if (const Json* v = g.find(key)) {
      require(v->is_array(), ErrorKind::kConfig, g.field(key) + ": expected an array");
      for (std::size_t i = 0; i < v->size(); ++i) {
        out.push_back(detail::parse_enum_value((*v)[i], g.field(key) + "[" + std::to_string(i) + "]", names));
      }
    }
  };
  list("models", s.models, detail::kModelNames);
  list("samplings", s.samplings, detail::kSamplingNames);
  list("modes", s.modes, detail::kModeNames);
  g.read("tree_series", s.tree_series);
  g.finish();
  top.finish();
  return s;
}

inline SweepConfig load_sweep_file(const std::string& path) {
  SweepConfig s = parse_sweep(read_json_file(path));
  apply_env_overrides(s.base);
  return s;
}

namespace detail {

inline ExperimentConfig cell_config(const ExperimentConfig& base, ModelChoice m, SamplingRequest s, Mode mode) {
  ExperimentConfig c = base;
  c.model = m;
  c.sampling = s;
  c.mode = mode;
  if (m != ModelChoice::kForest) c.subset_policy.reset();
  if (m != ModelChoice::kGbt) c.p_top.reset();
  if (!is_parametric(m) || mode != Mode::kFederated) c.dp.enabled = false;
  return c;
}

inline void append_cell(ExperimentReport& report, const ExperimentConfig& c, const DataTable* data) {
  std::optional<std::string> config_error;
  try {
    c.validate();
  } catch (const Error& e) {
    config_error = e.what();
  }
  for (auto seed : c.seeds) {
    try {
      if (config_error) fail(ErrorKind::kConfig, *config_error);
      report.records.push_back(run_cell(c, *data, seed));
    } catch (const Error& e) {
      RunRecord rec;
      rec.model = std::string(to_string(c.model));
      rec.sampling = std::string(to_string(c.strategy()));
      rec.mode = std::string(to_string(c.mode));
      rec.seed = seed;
      rec.error = std::string(to_string(e.kind())) + ": " + e.what();
      report.records.push_back(std::move(rec));
    }
  }
}

}  // namespace detail

/// Runs every models x samplings x modes cell for every seed. A failing
/// cell records its error and the sweep continues.
inline ExperimentReport sweep(const SweepConfig& s) {
  ExperimentReport report;
  Json echo = config_to_json(s.base);
  echo.erase("model");
  echo.erase("sampling");
  echo.erase("mode");
  Json grid;
  grid["models"] = Json::array();
  for (auto m : s.models) grid["models"].push_back(to_string(m));
  grid["samplings"] = Json::array();
  for (auto x : s.samplings) grid["samplings"].push_back(to_string(x));
  grid["modes"] = Json::array();
  for (auto m : s.modes) grid["modes"].push_back(to_string(m));
  grid["tree_series"] = s.tree_series;
  echo["grid"] = grid;
  report.config = echo;

  const bool any_cells = !s.models.empty() && !s.samplings.empty() && !s.modes.empty();
  if (!any_cells && !s.tree_series) return report;
  const DataTable data = load_dataset(s.base, &report.dataset);

  for (auto model : s.models) {
    for (auto sampling : s.samplings) {
      for (auto mode : s.modes) detail::append_cell(report, detail::cell_config(s.base, model, sampling, mode), &data);
    }
  }

  if (s.tree_series) {
    struct Point {
      const char* name;
      ExperimentConfig config;
    };
    auto full = detail::cell_config(s.base, ModelChoice::kForest, s.base.sampling, Mode::kFederated);
    full.subset_policy = SubsetPolicy::fraction_of(1.0);
    auto subset = detail::cell_config(s.base, ModelChoice::kForest, s.base.sampling, Mode::kFederated);
    subset.subset_policy = s.base.subset_policy.value_or(SubsetPolicy::sqrt_k());
    auto gbt = detail::cell_config(s.base, ModelChoice::kGbt, s.base.sampling, Mode::kFederated);
    const Point points[] = {{"full_forest", full}, {"subset_forest", subset}, {"gbt_feature_extraction", gbt}};
    Json series = Json::array();
    std::vector<double> mean_f1;
    for (const auto& p : points) {
      ExperimentReport part;
      detail::append_cell(part, p.config, &data);
      double f1 = 0, bytes = 0;
      std::size_t ok = 0;
      std::optional<std::string> err;
      for (const auto& rec : part.records) {
        if (rec.metrics) {
          f1 += rec.metrics->f1;
          bytes += static_cast<double>(rec.up_bytes);
          ++ok;
        } else if (!err) {
          err = rec.error;
        }
      }
      mean_f1.push_back(ok ? f1 / static_cast<double>(ok) : std::numeric_limits<double>::quiet_NaN());
      Json point{{"strategy", p.name}};
      if (p.config.model == ModelChoice::kForest) point["subset_policy"] = p.config.effective_subset_policy().describe();
      point["upload_bytes"] = ok ? Json(bytes / static_cast<double>(ok)) : Json(nullptr);
      point["f1"] = ok ? Json(mean_f1.back()) : Json(nullptr);
      point["seeds"] = ok;
      point["error"] = err ? Json(*err) : Json(nullptr);
      series.push_back(point);
    }
    Json extras;
    extras["points"] = series;
    if (std::isfinite(mean_f1[0]) && std::isfinite(mean_f1[1])) {
      const double delta = mean_f1[0] - mean_f1[1];
      extras["full_vs_subset_delta_f1"] = {{"delta_f1", delta},
                                           {"bound", kTreeSubsetF1Bound},
                                           {"within_bound", std::abs(delta) <= kTreeSubsetF1Bound}};
    }
    report.tradeoff_series = extras;
  }
  return report;
}

}  // namespace fedtab

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

// Parametric models: L2 logistic regression, a linear hinge-loss SVM over
// an explicit polynomial feature map, and a one-hidden-layer sigmoid
// network. Every model is a flat ParamVector so that clients can average
// them; the network objective optionally carries a proximal pull towards
// a reference vector.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fedtab/dataset.hpp"
#include "fedtab/error.hpp"
#include "fedtab/optim.hpp"
#include "fedtab/param_vector.hpp"
#include "fedtab/resampling.hpp"
#include "fedtab/rng.hpp"

namespace fedtab {

enum class ModelKind { kLogistic, kSvm, kNeuralNet };

inline std::string_view to_string(ModelKind k) {
  switch (k) {
    case ModelKind::kLogistic: return "logistic";
    case ModelKind::kSvm: return "svm";
    case ModelKind::kNeuralNet: return "nn";
  }
  return "unknown";
}

struct LogisticConfig {
  double l2_lambda = 0.01;
  std::size_t max_iter = 200;
  double tolerance = 1e-6;

  void validate() const {
    require(l2_lambda >= 0.0, ErrorKind::kConfig, "logistic.l2_lambda must be >= 0");
    require(tolerance > 0.0, ErrorKind::kConfig, "logistic.tolerance must be > 0");
  }
};

struct SvmConfig {
  int degree = 3;
  double c = 1.0;
  std::size_t epochs = 100;
  double learning_rate = 0.05;
  /// Inputs are scaled by sqrt(gamma) before the monomial map; 0 selects
  /// 1/d, the usual kernel scale for standardized inputs.
  double gamma = 0.0;

  void validate() const {
    require(degree >= 1, ErrorKind::kConfig, "svm.degree must be >= 1");
    require(c > 0.0, ErrorKind::kConfig, "svm.c must be > 0");
    require(learning_rate > 0.0, ErrorKind::kConfig, "svm.learning_rate must be > 0");
    require(gamma >= 0.0, ErrorKind::kConfig, "svm.gamma must be >= 0");
  }

  double effective_gamma(std::size_t d) const {
    return gamma > 0.0 ? gamma : 1.0 / static_cast<double>(std::max<std::size_t>(d, 1));
  }
};

struct NeuralNetConfig {
  std::size_t hidden_units = 16;
  std::size_t epochs = 10;
  double learning_rate = 0.5;
  std::size_t batch_size = 32;
  double prox_mu = 0.0;
  std::uint64_t seed = 0;

  void validate() const {
    require(hidden_units >= 1, ErrorKind::kConfig, "nn.hidden_units must be >= 1");
    require(batch_size >= 1, ErrorKind::kConfig, "nn.batch_size must be >= 1");
    require(learning_rate > 0.0, ErrorKind::kConfig, "nn.learning_rate must be > 0");
    require(prox_mu >= 0.0, ErrorKind::kConfig, "nn.prox_mu must be >= 0");
  }
};

inline constexpr double kDefaultFedProxMu = 0.01;

// ---------------------------------------------------------------------------
// Polynomial feature map

inline std::size_t binomial(std::size_t n, std::size_t k) {
  k = std::min(k, n - k);
  std::size_t r = 1;
  for (std::size_t i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

inline std::size_t poly_feature_count(std::size_t d, int degree) {
  return binomial(d + static_cast<std::size_t>(degree), static_cast<std::size_t>(degree));
}

/// All monomials of total degree <= `degree`, graded then lexicographic in
/// the (non-decreasing) index tuple: 1, x1..xd, x1x1, x1x2, ..., xdxd, ...
inline void poly_feature_map(std::span<const double> x, int degree, std::vector<double>& out) {
  require(degree >= 1, ErrorKind::kInvalidArgument, "poly_feature_map: degree must be >= 1");
  out.clear();
  out.reserve(poly_feature_count(x.size(), degree));
  std::vector<std::size_t> last_index;
  out.push_back(1.0);
  last_index.push_back(0);
  std::size_t begin = 0, end = 1;
  for (int t = 1; t <= degree; ++t) {
    for (std::size_t m = begin; m < end; ++m) {
      for (std::size_t j = last_index[m]; j < x.size(); ++j) {
        out.push_back(out[m] * x[j]);
        last_index.push_back(j);
      }
    }
    begin = end;
    end = out.size();
  }
}

inline std::vector<double> poly_feature_map(std::span<const double> x, int degree) {
  std::vector<double> out;
  poly_feature_map(x, degree, out);
  return out;
}

// ---------------------------------------------------------------------------
// Layouts

inline ParamLayout logistic_layout(std::size_t d) { return {{{"w", d}, {"b", 1}}}; }

inline ParamLayout svm_layout(std::size_t d, int degree) {
  return {{{"w", poly_feature_count(d, degree)}}};
}

inline ParamLayout nn_layout(std::size_t d, std::size_t hidden) {
  return {{{"W1", hidden * d}, {"b1", hidden}, {"W2", hidden}, {"b2", 1}}};
}

/// Uniform in +-1/sqrt(fan_in) per layer.
inline ParamVector init_nn(std::size_t d, std::size_t hidden, std::uint64_t seed) {
  auto p = ParamVector::zeros(nn_layout(d, hidden));
  Rng rng(derive_seed(seed, {0x1717}));
  const double r1 = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(d, 1)));
  const double r2 = 1.0 / std::sqrt(static_cast<double>(hidden));
  for (auto& v : p.segment("W1")) v = rng.uniform(-r1, r1);
  for (auto& v : p.segment("b1")) v = rng.uniform(-r1, r1);
  for (auto& v : p.segment("W2")) v = rng.uniform(-r2, r2);
  for (auto& v : p.segment("b2")) v = rng.uniform(-r2, r2);
  return p;
}

// ---------------------------------------------------------------------------
// Scalar helpers

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

/// log(1 + exp(z)) without overflow.
inline double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

/// Binary cross-entropy of sigmoid(z) against y, in logit form.
inline double logit_loss(double z, int y) { return softplus(z) - (y == 1 ? z : 0.0); }

// ---------------------------------------------------------------------------
// Objectives and gradients

namespace detail {

inline double logistic_loss_grad(std::span<const double> theta, const DataTable& data, double lambda,
                                 std::span<double> grad) {
  const std::size_t d = data.n_features();
  const auto w = theta.first(d);
  const double b = theta[d];
  const bool want_grad = !grad.empty();
  if (want_grad) std::fill(grad.begin(), grad.end(), 0.0);
  double loss = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto x = data.row(i);
    const double z = detail::dot(w, x) + b;
    loss += logit_loss(z, data.labels[i]);
    if (want_grad) {
      const double r = sigmoid(z) - data.labels[i];
      for (std::size_t j = 0; j < d; ++j) grad[j] += r * x[j];
      grad[d] += r;
    }
  }
  const double n = static_cast<double>(data.size());
  loss /= n;
  double reg = 0.0;
  for (std::size_t j = 0; j < d; ++j) reg += w[j] * w[j];
  loss += 0.5 * lambda * reg;
  if (want_grad) {
    for (auto& g : grad) g /= n;
    for (std::size_t j = 0; j < d; ++j) grad[j] += lambda * w[j];
  }
  return loss;
}

/// Expanded SVM design: phi(sqrt(gamma) * x) per row, labels in {-1,+1}.
struct SvmDesign {
  std::size_t cols = 0;
  std::vector<double> phi;
  std::vector<double> sign;

  std::span<const double> row(std::size_t i) const { return {phi.data() + i * cols, cols}; }
  std::size_t size() const { return sign.size(); }
};

inline SvmDesign svm_design(const DataTable& data, const SvmConfig& cfg) {
  SvmDesign design;
  design.cols = poly_feature_count(data.n_features(), cfg.degree);
  design.phi.reserve(design.cols * data.size());
  const double s = std::sqrt(cfg.effective_gamma(data.n_features()));
  std::vector<double> scaled(data.n_features()), phi;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto x = data.row(i);
    for (std::size_t j = 0; j < x.size(); ++j) scaled[j] = s * x[j];
    poly_feature_map(scaled, cfg.degree, phi);
    design.phi.insert(design.phi.end(), phi.begin(), phi.end());
    design.sign.push_back(data.labels[i] == 1 ? 1.0 : -1.0);
  }
  return design;
}

/// (1/2)|w|^2 + C * mean(hinge). The subgradient uses 0 at the kink.
inline double svm_loss_grad(std::span<const double> w, const SvmDesign& design, double c,
                            std::span<double> grad) {
  const bool want_grad = !grad.empty();
  if (want_grad) std::fill(grad.begin(), grad.end(), 0.0);
  double hinge = 0.0;
  for (std::size_t i = 0; i < design.size(); ++i) {
    const auto phi = design.row(i);
    const double margin = design.sign[i] * detail::dot(w, phi);
    if (margin < 1.0) {
      hinge += 1.0 - margin;
      if (want_grad) {
        for (std::size_t j = 0; j < w.size(); ++j) grad[j] -= design.sign[i] * phi[j];
      }
    }
  }
  const double n = static_cast<double>(design.size());
  double reg = 0.0;
  for (double v : w) reg += v * v;
  if (want_grad) {
    for (std::size_t j = 0; j < w.size(); ++j) grad[j] = c * grad[j] / n + w[j];
  }
  return 0.5 * reg + c * hinge / n;
}

struct NnShape {
  std::size_t d = 0;
  std::size_t hidden = 0;
};

inline NnShape nn_shape(const ParamVector& p, std::size_t d) {
  p.check_consistent();
  require(p.layout.segments.size() == 4 && d > 0, ErrorKind::kLayoutMismatch,
          "neural net: layout " + p.layout.describe() + " is not {W1,b1,W2,b2}");
  const std::size_t hidden = p.layout.segments[1].length;
  require(p.layout == nn_layout(d, hidden), ErrorKind::kLayoutMismatch,
          "neural net: layout " + p.layout.describe() + " does not fit " + std::to_string(d) +
              " input features");
  return {d, hidden};
}

/// Mean BCE over `rows` (all rows when empty) and, optionally, its gradient.
inline double nn_loss_grad(std::span<const double> theta, NnShape shape, const DataTable& data,
                           std::span<const std::size_t> rows, std::span<double> grad) {
  const std::size_t d = shape.d, h = shape.hidden;
  const double* W1 = theta.data();
  const double* b1 = W1 + h * d;
  const double* W2 = b1 + h;
  const double b2 = W2[h];
  const bool want_grad = !grad.empty();
  double* gW1 = want_grad ? grad.data() : nullptr;
  double* gb1 = want_grad ? gW1 + h * d : nullptr;
  double* gW2 = want_grad ? gb1 + h : nullptr;
  if (want_grad) std::fill(grad.begin(), grad.end(), 0.0);

  const std::size_t n = rows.empty() ? data.size() : rows.size();
  std::vector<double> hid(h);
  double loss = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t i = rows.empty() ? r : rows[r];
    const auto x = data.row(i);
    double a = b2;
    for (std::size_t k = 0; k < h; ++k) {
      double z = b1[k];
      const double* wk = W1 + k * d;
      for (std::size_t j = 0; j < d; ++j) z += wk[j] * x[j];
      hid[k] = sigmoid(z);
      a += W2[k] * hid[k];
    }
    const int y = data.labels[i];
    loss += logit_loss(a, y);
    if (want_grad) {
      const double da = sigmoid(a) - y;
      grad[grad.size() - 1] += da;
      for (std::size_t k = 0; k < h; ++k) {
        gW2[k] += da * hid[k];
        const double dz = da * W2[k] * hid[k] * (1.0 - hid[k]);
        gb1[k] += dz;
        double* gk = gW1 + k * d;
        for (std::size_t j = 0; j < d; ++j) gk[j] += dz * x[j];
      }
    }
  }
  const double inv = 1.0 / static_cast<double>(n);
  if (want_grad) {
    for (auto& g : grad) g *= inv;
  }
  return loss * inv;
}

inline double prox_term(std::span<const double> theta, const ParamVector* ref, double mu,
                        std::span<double> grad) {
  if (ref == nullptr || mu == 0.0) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double diff = theta[i] - ref->values[i];
    s += diff * diff;
    if (!grad.empty()) grad[i] += mu * diff;
  }
  return 0.5 * mu * s;
}

}  // namespace detail

/// Hyperparameters that enter a model's training objective.
struct ObjectiveOptions {
  LogisticConfig logistic;
  SvmConfig svm;
  double prox_mu = 0.0;
  std::optional<ParamVector> prox_ref;
};

namespace detail {

inline double evaluate_objective(ModelKind kind, const ParamVector& params, const DataTable& batch,
                                 const ObjectiveOptions& opts, std::span<double> grad) {
  require(!batch.empty(), ErrorKind::kInvalidArgument, "objective: empty batch");
  const std::size_t d = batch.n_features();
  switch (kind) {
    case ModelKind::kLogistic:
      require_layout(params, logistic_layout(d), "logistic objective");
      return logistic_loss_grad(params.values, batch, opts.logistic.l2_lambda, grad);
    case ModelKind::kSvm: {
      require_layout(params, svm_layout(d, opts.svm.degree), "svm objective");
      const auto design = svm_design(batch, opts.svm);
      return svm_loss_grad(params.values, design, opts.svm.c, grad);
    }
    case ModelKind::kNeuralNet: {
      const auto shape = nn_shape(params, d);
      const ParamVector* ref = opts.prox_ref ? &*opts.prox_ref : nullptr;
      if (ref) require_layout(*ref, params.layout, "neural net proximal reference");
      const double loss = nn_loss_grad(params.values, shape, batch, {}, grad);
      return loss + prox_term(params.values, ref, opts.prox_mu, grad);
    }
  }
  return 0.0;
}

}  // namespace detail

/// Training objective value on `batch` (features used as given).
inline double objective_of(ModelKind kind, const ParamVector& params, const DataTable& batch,
                           const ObjectiveOptions& opts = {}) {
  return detail::evaluate_objective(kind, params, batch, opts, {});
}

/// Analytic gradient of objective_of with respect to `params`.
inline ParamVector gradient_of(ModelKind kind, const ParamVector& params, const DataTable& batch,
                               const ObjectiveOptions& opts = {}) {
  ParamVector g = ParamVector::zeros(params.layout);
  detail::evaluate_objective(kind, params, batch, opts, g.values);
  return g;
}

// ---------------------------------------------------------------------------
// Training

/// Minimizes mean log-loss + (lambda/2)|w|^2 (bias unpenalized) with
/// L-BFGS until the gradient infinity norm reaches `tolerance` or
/// `max_iter` iterations have run.
inline ParamVector train_logistic(const DataTable& train, const LogisticConfig& cfg,
                                  const std::optional<ParamVector>& init = std::nullopt) {
  cfg.validate();
  require_both_classes(train, "train_logistic");
  const auto layout = logistic_layout(train.n_features());
  ParamVector start = init ? *init : ParamVector::zeros(layout);
  require_layout(start, layout, "train_logistic init");
  auto f = [&](std::span<const double> theta, std::span<double> grad) {
    return detail::logistic_loss_grad(theta, train, cfg.l2_lambda, grad);
  };
  const auto result = minimize_lbfgs(f, start.values, {.max_iter = cfg.max_iter, .tolerance = cfg.tolerance});
  require(std::isfinite(result.value), ErrorKind::kNumerical,
          "train_logistic: non-finite loss (check feature scaling)");
  return ParamVector{layout, result.x};
}

inline double predict_logistic(const ParamVector& model, std::span<const double> x) {
  require_layout(model, logistic_layout(x.size()), "predict_logistic");
  return sigmoid(detail::dot(std::span<const double>(model.values).first(x.size()), x) + model.values[x.size()]);
}

/// Full-batch subgradient descent on (1/2)|w|^2 + C * mean(hinge) in the
/// polynomial feature space. Labels are mapped to {-1,+1}.
inline ParamVector train_svm(const DataTable& train, const SvmConfig& cfg,
                             const std::optional<ParamVector>& init = std::nullopt) {
  cfg.validate();
  require_both_classes(train, "train_svm");
  const auto layout = svm_layout(train.n_features(), cfg.degree);
  ParamVector w = init ? *init : ParamVector::zeros(layout);
  require_layout(w, layout, "train_svm init");
  if (cfg.epochs == 0) return w;
  const auto design = detail::svm_design(train, cfg);
  std::vector<double> grad(w.size());
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double loss = detail::svm_loss_grad(w.values, design, cfg.c, grad);
    require(std::isfinite(loss), ErrorKind::kNumerical, "train_svm: non-finite objective");
    for (std::size_t j = 0; j < w.size(); ++j) w.values[j] -= cfg.learning_rate * grad[j];
  }
  return w;
}

/// Decision value w . phi(sqrt(gamma) x); class 1 iff >= 0.
inline double svm_decision(const ParamVector& model, std::span<const double> x, const SvmConfig& cfg) {
  require_layout(model, svm_layout(x.size(), cfg.degree), "svm_decision");
  const double s = std::sqrt(cfg.effective_gamma(x.size()));
  std::vector<double> scaled(x.begin(), x.end());
  for (auto& v : scaled) v *= s;
  const auto phi = poly_feature_map(scaled, cfg.degree);
  return detail::dot(model.values, phi);
}

/// Mini-batch gradient descent on mean BCE + (prox_mu/2)|theta - ref|^2
/// (the proximal term only when `global_ref` is given). Batch order is
/// reshuffled each epoch from cfg.seed.
inline ParamVector train_nn(const DataTable& train, const NeuralNetConfig& cfg, const ParamVector& init,
                            const std::optional<ParamVector>& global_ref = std::nullopt) {
  cfg.validate();
  require(!train.empty(), ErrorKind::kInvalidArgument, "train_nn: empty table");
  const auto shape = detail::nn_shape(init, train.n_features());
  require(shape.hidden == cfg.hidden_units, ErrorKind::kLayoutMismatch,
          "train_nn: init has " + std::to_string(shape.hidden) + " hidden units, config " +
              std::to_string(cfg.hidden_units));
  const ParamVector* ref = global_ref ? &*global_ref : nullptr;
  if (ref) require_layout(*ref, init.layout, "train_nn global_ref");

  ParamVector theta = init;
  std::vector<double> grad(theta.size());
  std::vector<std::size_t> order(train.size());
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(cfg.seed, {0x22, epoch}));
    rng.shuffle(std::span(order));
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const auto batch = std::span<const std::size_t>(order).subspan(
          start, std::min(cfg.batch_size, order.size() - start));
      epoch_loss += detail::nn_loss_grad(theta.values, shape, train, batch, grad);
      detail::prox_term(theta.values, ref, cfg.prox_mu, grad);
      for (std::size_t j = 0; j < theta.size(); ++j) theta.values[j] -= cfg.learning_rate * grad[j];
    }
    require(std::isfinite(epoch_loss), ErrorKind::kNumerical, "train_nn: non-finite loss");
  }
  return theta;
}

inline double predict_nn(const ParamVector& model, std::span<const double> x) {
  const auto shape = detail::nn_shape(model, x.size());
  const std::size_t d = shape.d, h = shape.hidden;
  const auto& t = model.values;
  double a = t[h * d + 2 * h];
  for (std::size_t k = 0; k < h; ++k) {
    double z = t[h * d + k];
    for (std::size_t j = 0; j < d; ++j) z += t[k * d + j] * x[j];
    a += t[h * d + h + k] * sigmoid(z);
  }
  return sigmoid(a);
}

// ---------------------------------------------------------------------------
// Deployable model: scaler + parameters

struct ParametricConfig {
  LogisticConfig logistic;
  SvmConfig svm;
  NeuralNetConfig nn;
};

/// A trained parametric model together with the standardization applied to
/// raw features before the parameters see them.
struct ParametricModel {
  ModelKind kind = ModelKind::kLogistic;
  Standardizer scaler;
  ParamVector params;
  SvmConfig svm;  // degree and input scale of the feature map

  /// Probability (logistic, nn) or decision value (svm) on a raw row.
  double score(std::span<const double> raw) const {
    const auto z = scaler.transform(raw);
    switch (kind) {
      case ModelKind::kLogistic: return predict_logistic(params, z);
      case ModelKind::kSvm: return svm_decision(params, z, svm);
      case ModelKind::kNeuralNet: return predict_nn(params, z);
    }
    return 0.0;
  }

  int predict(std::span<const double> raw) const {
    const double s = score(raw);
    return kind == ModelKind::kSvm ? (s >= 0.0 ? 1 : 0) : (s >= 0.5 ? 1 : 0);
  }
};

inline ParamLayout layout_for(ModelKind kind, std::size_t d, const ParametricConfig& cfg) {
  switch (kind) {
    case ModelKind::kLogistic: return logistic_layout(d);
    case ModelKind::kSvm: return svm_layout(d, cfg.svm.degree);
    case ModelKind::kNeuralNet: return nn_layout(d, cfg.nn.hidden_units);
  }
  return {};
}

/// Initial global parameters: zeros for the convex models, seeded uniform
/// for the network.
inline ParamVector initial_params(ModelKind kind, std::size_t d, const ParametricConfig& cfg,
                                  std::uint64_t seed) {
  if (kind == ModelKind::kNeuralNet) return init_nn(d, cfg.nn.hidden_units, seed);
  return ParamVector::zeros(layout_for(kind, d, cfg));
}

/// Trains on an already-standardized table starting from `init`.
/// `global_ref` is the FedProx anchor for the network and ignored otherwise.
inline ParamVector train_parametric(ModelKind kind, const DataTable& standardized,
                                    const ParametricConfig& cfg, const ParamVector& init,
                                    const std::optional<ParamVector>& global_ref = std::nullopt) {
  switch (kind) {
    case ModelKind::kLogistic: return train_logistic(standardized, cfg.logistic, init);
    case ModelKind::kSvm: return train_svm(standardized, cfg.svm, init);
    case ModelKind::kNeuralNet: return train_nn(standardized, cfg.nn, init, global_ref);
  }
  return init;
}

}  // namespace fedtab

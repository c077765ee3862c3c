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

#include <cmath>
#include <cstddef>
#include <deque>
#include <span>
#include <vector>

#include "fedtab/error.hpp"

namespace fedtab {

struct LbfgsOptions {
  std::size_t max_iter = 100;
  double tolerance = 1e-6;  // on the gradient infinity norm
  std::size_t memory = 10;
  std::size_t max_line_search = 40;
};

struct LbfgsResult {
  std::vector<double> x;
  double value = 0.0;
  double grad_norm = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
};

namespace detail {

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double inf_norm(std::span<const double> a) {
  double m = 0.0;
  for (double v : a) m = std::max(m, std::abs(v));
  return m;
}

}  // namespace detail

/// Limited-memory BFGS with Armijo backtracking.
///
/// `objective(x, grad)` returns f(x) and writes the gradient into `grad`.
/// Curvature pairs with s.y <= 0 are skipped. A non-finite objective value
/// at an accepted point raises ErrorKind::kNumerical.
template <typename Objective>
LbfgsResult minimize_lbfgs(Objective&& objective, std::vector<double> x0,
                           const LbfgsOptions& options = {}) {
  const std::size_t n = x0.size();
  LbfgsResult r;
  r.x = std::move(x0);
  std::vector<double> g(n), g_new(n), x_new(n), dir(n);
  r.value = objective(std::span<const double>(r.x), std::span<double>(g));
  require(std::isfinite(r.value), ErrorKind::kNumerical,
          "lbfgs: non-finite objective at the initial point");

  struct Pair {
    std::vector<double> s, y;
    double rho;
  };
  std::deque<Pair> history;
  std::vector<double> alpha(options.memory);

  for (r.iterations = 0; r.iterations < options.max_iter; ++r.iterations) {
    r.grad_norm = detail::inf_norm(g);
    if (r.grad_norm <= options.tolerance) {
      r.converged = true;
      return r;
    }

    // Two-loop recursion.
    for (std::size_t i = 0; i < n; ++i) dir[i] = -g[i];
    for (std::size_t k = history.size(); k-- > 0;) {
      alpha[k] = history[k].rho * detail::dot(history[k].s, dir);
      for (std::size_t i = 0; i < n; ++i) dir[i] -= alpha[k] * history[k].y[i];
    }
    if (!history.empty()) {
      const auto& last = history.back();
      const double gamma = detail::dot(last.s, last.y) / detail::dot(last.y, last.y);
      for (auto& v : dir) v *= gamma;
    }
    for (std::size_t k = 0; k < history.size(); ++k) {
      const double beta = history[k].rho * detail::dot(history[k].y, dir);
      for (std::size_t i = 0; i < n; ++i) dir[i] += (alpha[k] - beta) * history[k].s[i];
    }

    double slope = detail::dot(g, dir);
    if (slope >= 0.0) {
      // Not a descent direction; restart from steepest descent.
      history.clear();
      for (std::size_t i = 0; i < n; ++i) dir[i] = -g[i];
      slope = detail::dot(g, dir);
    }

    double step = history.empty() ? std::min(1.0, 1.0 / std::max(1e-12, detail::inf_norm(g))) : 1.0;
    double value_new = 0.0;
    bool accepted = false;
    for (std::size_t ls = 0; ls < options.max_line_search; ++ls) {
      for (std::size_t i = 0; i < n; ++i) x_new[i] = r.x[i] + step * dir[i];
      value_new = objective(std::span<const double>(x_new), std::span<double>(g_new));
      if (std::isfinite(value_new) && value_new <= r.value + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      require(std::isfinite(r.value), ErrorKind::kNumerical, "lbfgs: non-finite objective");
      return r;  // line search exhausted; no further progress at this precision
    }

    Pair p{std::vector<double>(n), std::vector<double>(n), 0.0};
    for (std::size_t i = 0; i < n; ++i) {
      p.s[i] = x_new[i] - r.x[i];
      p.y[i] = g_new[i] - g[i];
    }
    const double sy = detail::dot(p.s, p.y);
    if (sy > 1e-12) {
      p.rho = 1.0 / sy;
      history.push_back(std::move(p));
      if (history.size() > options.memory) history.pop_front();
    }
    r.x.swap(x_new);
    g.swap(g_new);
    r.value = value_new;
  }
  r.grad_norm = detail::inf_norm(g);
  r.converged = r.grad_norm <= options.tolerance;
  return r;
}

}  // namespace fedtab

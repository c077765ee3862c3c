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
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fedtab/error.hpp"

namespace fedtab {

struct Segment {
  std::string name;
  std::size_t length = 0;

  friend bool operator==(const Segment&, const Segment&) = default;
};

/// Named segments of a flat parameter vector. Two vectors can be averaged
/// iff their layouts compare equal.
struct ParamLayout {
  std::vector<Segment> segments;

  std::size_t total() const {
    return std::accumulate(segments.begin(), segments.end(), std::size_t{0},
                           [](std::size_t acc, const Segment& s) { return acc + s.length; });
  }

  /// Offset of the named segment; throws if absent.
  std::size_t offset(const std::string& name) const {
    std::size_t off = 0;
    for (const auto& s : segments) {
      if (s.name == name) return off;
      off += s.length;
    }
    fail(ErrorKind::kLayoutMismatch, "layout has no segment '" + name + "'");
  }

  std::string describe() const {
    std::string out;
    for (const auto& s : segments) {
      if (!out.empty()) out += ",";
      out += s.name + ":" + std::to_string(s.length);
    }
    return "{" + out + "}";
  }

  friend bool operator==(const ParamLayout&, const ParamLayout&) = default;
};

struct ParamVector {
  ParamLayout layout;
  std::vector<double> values;

  static ParamVector zeros(ParamLayout layout) {
    ParamVector p{std::move(layout), {}};
    p.values.assign(p.layout.total(), 0.0);
    return p;
  }

  std::size_t size() const { return values.size(); }

  std::span<double> segment(const std::string& name) {
    for (std::size_t off = 0; const auto& s : layout.segments) {
      if (s.name == name) return std::span(values).subspan(off, s.length);
      off += s.length;
    }
    fail(ErrorKind::kLayoutMismatch, "layout has no segment '" + name + "'");
  }
  std::span<const double> segment(const std::string& name) const {
    return const_cast<ParamVector*>(this)->segment(name);
  }

  void check_consistent() const {
    require(layout.total() == values.size(), ErrorKind::kLayoutMismatch,
            "parameter vector length " + std::to_string(values.size()) +
                " does not match layout " + layout.describe());
  }

  double norm() const {
    double s = 0.0;
    for (double v : values) s += v * v;
    return std::sqrt(s);
  }

  friend bool operator==(const ParamVector&, const ParamVector&) = default;
};

inline void require_layout(const ParamVector& p, const ParamLayout& expected, const char* op) {
  p.check_consistent();
  require(p.layout == expected, ErrorKind::kLayoutMismatch,
          std::string(op) + ": layout " + p.layout.describe() + " does not match expected " +
              expected.describe());
}

inline double distance(const ParamVector& a, const ParamVector& b) {
  require(a.layout == b.layout, ErrorKind::kLayoutMismatch, "distance: layout mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a.values[i] - b.values[i];
    s += d * d;
  }
  return std::sqrt(s);
}

}  // namespace fedtab

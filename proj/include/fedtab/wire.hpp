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

// Canonical little-endian encodings of everything that crosses the
// client/server boundary, and the framing that wraps them.
//
//   ParamVector   n x f64 (the layout is implied by the model kind)
//   Tree          preorder; internal = u8 1, i32 feature, f64 threshold (13 B)
//                           leaf     = u8 0, f64 value                  (9 B)
//   TreeEnsemble  u32 count, trees, then a kind-specific trailer:
//                 weighted_vote: count x f64 weights
//                 boosted_sum:   f64 base score, f64 learning rate
//                 forest_vote:   nothing
//   ClassStats    u32 d, d x f64 mu, d x f64 sigma2, u64 n_minority,
//                 u64 n_majority, u8 minority label
//   Standardizer  u32 d, d x f64 mean, d x f64 scale
//   Frame         u8 payload kind, u32 body length, body

#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fedtab/error.hpp"
#include "fedtab/param_vector.hpp"
#include "fedtab/resampling.hpp"
#include "fedtab/tree.hpp"

namespace fedtab {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

enum class PayloadKind : std::uint8_t {
  kParamVector = 1,
  kTree = 2,
  kForestEnsemble = 3,
  kBoostedEnsemble = 4,
  kWeightedEnsemble = 5,
  kClassStats = 6,
  kScalerStats = 7,
};

inline std::string_view to_string(PayloadKind k) {
  switch (k) {
    case PayloadKind::kParamVector: return "param_vector";
    case PayloadKind::kTree: return "tree";
    case PayloadKind::kForestEnsemble: return "forest_ensemble";
    case PayloadKind::kBoostedEnsemble: return "boosted_ensemble";
    case PayloadKind::kWeightedEnsemble: return "weighted_ensemble";
    case PayloadKind::kClassStats: return "class_stats";
    case PayloadKind::kScalerStats: return "scaler_stats";
  }
  return "unknown";
}

inline constexpr std::size_t kFrameHeaderBytes = 5;
inline constexpr std::size_t kInternalNodeBytes = 13;
inline constexpr std::size_t kLeafNodeBytes = 9;

using Bytes = std::vector<std::uint8_t>;

class ByteWriter {
 public:
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u32(std::uint32_t v) { put(v); }
  void i32(std::int32_t v) { put(static_cast<std::uint32_t>(v)); }
  void u64(std::uint64_t v) { put(v); }
  void f64(double v) { put(std::bit_cast<std::uint64_t>(v)); }
  void bytes(std::span<const std::uint8_t> b) { buf_.insert(buf_.end(), b.begin(), b.end()); }

  Bytes take() { return std::move(buf_); }
  std::size_t size() const { return buf_.size(); }

 private:
  template <typename U>
  void put(U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  Bytes buf_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> data) : data_(data) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(get<std::uint8_t>()); }
  std::uint32_t u32() { return get<std::uint32_t>(); }
  std::int32_t i32() { return static_cast<std::int32_t>(get<std::uint32_t>()); }
  std::uint64_t u64() { return get<std::uint64_t>(); }
  double f64() { return std::bit_cast<double>(get<std::uint64_t>()); }
  std::span<const std::uint8_t> bytes(std::size_t n) {
    need(n);
    auto s = data_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == data_.size(); }
  void expect_done(const char* what) const {
    require(done(), ErrorKind::kParse, std::string(what) + ": trailing bytes");
  }

 private:
  void need(std::size_t n) const {
    require(data_.size() - pos_ >= n, ErrorKind::kParse, "wire: truncated payload");
  }
  template <typename U>
  U get() {
    need(sizeof(U));
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(static_cast<U>(data_[pos_ + i]) << (8 * i));
    pos_ += sizeof(U);
    return v;
  }

  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

// ---------------------------------------------------------------------------
// Encoders

inline void encode(ByteWriter& w, const ParamVector& p) {
  for (double v : p.values) w.f64(v);
}

namespace detail {

inline void encode_subtree(ByteWriter& w, const Tree& t, std::size_t i) {
  const auto& n = t.nodes[i];
  if (n.is_leaf()) {
    w.u8(0);
    w.f64(n.value);
    return;
  }
  w.u8(1);
  w.i32(n.feature);
  w.f64(n.threshold);
  encode_subtree(w, t, static_cast<std::size_t>(n.left));
  encode_subtree(w, t, static_cast<std::size_t>(n.right));
}

inline void decode_subtree(ByteReader& r, Tree& t, std::size_t depth) {
  require(depth < 4096, ErrorKind::kParse, "wire: tree too deep");
  const std::size_t id = t.nodes.size();
  t.nodes.emplace_back();
  const auto flag = r.u8();
  if (flag == 0) {
    t.nodes[id].value = r.f64();
    return;
  }
  require(flag == 1, ErrorKind::kParse, "wire: bad tree node flag");
  const auto feature = r.i32();
  require(feature >= 0, ErrorKind::kParse, "wire: negative feature index");
  t.nodes[id].feature = feature;
  t.nodes[id].threshold = r.f64();
  t.nodes[id].left = static_cast<std::int32_t>(t.nodes.size());
  decode_subtree(r, t, depth + 1);
  t.nodes[id].right = static_cast<std::int32_t>(t.nodes.size());
  decode_subtree(r, t, depth + 1);
}

}  // namespace detail

inline void encode(ByteWriter& w, const Tree& t) {
  require(!t.nodes.empty(), ErrorKind::kInvalidArgument, "encode: empty tree");
  detail::encode_subtree(w, t, 0);
}

inline void encode(ByteWriter& w, const TreeEnsemble& e) {
  e.validate();
  w.u32(static_cast<std::uint32_t>(e.trees.size()));
  for (const auto& t : e.trees) encode(w, t);
  if (e.kind == EnsembleKind::kWeightedVote) {
    for (double v : e.weights) w.f64(v);
  } else if (e.kind == EnsembleKind::kBoostedSum) {
    w.f64(e.base_score);
    w.f64(e.learning_rate);
  }
}

inline void encode(ByteWriter& w, const ClassStats& s) {
  w.u32(static_cast<std::uint32_t>(s.mu.size()));
  for (double v : s.mu) w.f64(v);
  for (double v : s.sigma2) w.f64(v);
  w.u64(s.n_minority);
  w.u64(s.n_majority);
  w.u8(static_cast<std::uint8_t>(s.minority_label));
}

inline void encode(ByteWriter& w, const Standardizer& s) {
  w.u32(static_cast<std::uint32_t>(s.mean.size()));
  for (double v : s.mean) w.f64(v);
  for (double v : s.scale) w.f64(v);
}

template <typename T>
Bytes serialize(const T& value) {
  ByteWriter w;
  encode(w, value);
  return w.take();
}

// ---------------------------------------------------------------------------
// Decoders

inline ParamVector decode_param_vector(std::span<const std::uint8_t> body, const ParamLayout& layout) {
  require(body.size() == 8 * layout.total(), ErrorKind::kParse,
          "wire: parameter payload size does not match layout " + layout.describe());
  ByteReader r(body);
  ParamVector p = ParamVector::zeros(layout);
  for (auto& v : p.values) v = r.f64();
  return p;
}

inline Tree decode_tree(ByteReader& r) {
  Tree t;
  detail::decode_subtree(r, t, 0);
  return t;
}

inline Tree decode_tree(std::span<const std::uint8_t> body) {
  ByteReader r(body);
  auto t = decode_tree(r);
  r.expect_done("tree");
  return t;
}

inline TreeEnsemble decode_ensemble(std::span<const std::uint8_t> body, EnsembleKind kind) {
  ByteReader r(body);
  TreeEnsemble e;
  e.kind = kind;
  const auto count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) e.trees.push_back(decode_tree(r));
  if (kind == EnsembleKind::kWeightedVote) {
    for (std::uint32_t i = 0; i < count; ++i) e.weights.push_back(r.f64());
  } else if (kind == EnsembleKind::kBoostedSum) {
    e.base_score = r.f64();
    e.learning_rate = r.f64();
  }
  r.expect_done("ensemble");
  return e;
}

inline ClassStats decode_class_stats(std::span<const std::uint8_t> body) {
  ByteReader r(body);
  ClassStats s;
  const auto d = r.u32();
  s.mu.resize(d);
  s.sigma2.resize(d);
  for (auto& v : s.mu) v = r.f64();
  for (auto& v : s.sigma2) v = r.f64();
  s.n_minority = r.u64();
  s.n_majority = r.u64();
  s.minority_label = r.u8();
  r.expect_done("class stats");
  return s;
}

inline Standardizer decode_standardizer(std::span<const std::uint8_t> body) {
  ByteReader r(body);
  Standardizer s;
  const auto d = r.u32();
  s.mean.resize(d);
  s.scale.resize(d);
  for (auto& v : s.mean) v = r.f64();
  for (auto& v : s.scale) v = r.f64();
  r.expect_done("scaler stats");
  return s;
}

// ---------------------------------------------------------------------------
// Sizes

/// Canonical body size of a payload, without framing.
inline std::size_t ledger_bytes(const ParamVector& p) { return 8 * p.values.size(); }

inline std::size_t ledger_bytes(const Tree& t) {
  const auto internal = t.internal_count();
  return internal * kInternalNodeBytes + (t.nodes.size() - internal) * kLeafNodeBytes;
}

inline std::size_t ledger_bytes(const TreeEnsemble& e) {
  std::size_t n = 4;
  for (const auto& t : e.trees) n += ledger_bytes(t);
  if (e.kind == EnsembleKind::kWeightedVote) n += 8 * e.weights.size();
  if (e.kind == EnsembleKind::kBoostedSum) n += 16;
  return n;
}

inline std::size_t ledger_bytes(const ClassStats& s) { return 4 + 16 * s.mu.size() + 17; }

inline std::size_t ledger_bytes(const Standardizer& s) { return 4 + 16 * s.mean.size(); }

// ---------------------------------------------------------------------------
// Framing

struct Frame {
  PayloadKind kind;
  Bytes body;
};

inline Bytes frame(PayloadKind kind, std::span<const std::uint8_t> body) {
  ByteWriter w;
  w.u8(static_cast<std::uint8_t>(kind));
  w.u32(static_cast<std::uint32_t>(body.size()));
  w.bytes(body);
  return w.take();
}

inline Frame unframe(std::span<const std::uint8_t> wire) {
  ByteReader r(wire);
  const auto kind = r.u8();
  require(kind >= 1 && kind <= 7, ErrorKind::kParse, "wire: unknown payload kind " + std::to_string(kind));
  const auto len = r.u32();
  auto body = r.bytes(len);
  r.expect_done("frame");
  return {static_cast<PayloadKind>(kind), Bytes(body.begin(), body.end())};
}

inline PayloadKind payload_kind_of(const TreeEnsemble& e) {
  switch (e.kind) {
    case EnsembleKind::kForestVote: return PayloadKind::kForestEnsemble;
    case EnsembleKind::kBoostedSum: return PayloadKind::kBoostedEnsemble;
    case EnsembleKind::kWeightedVote: return PayloadKind::kWeightedEnsemble;
  }
  return PayloadKind::kForestEnsemble;
}

}  // namespace fedtab

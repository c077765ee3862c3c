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

#include <gtest/gtest.h>

#include <vector>

#include "fedtab/wire.hpp"
#include "test_util.hpp"

namespace fedtab {
namespace {

using testing::error_kind_of;
using testing::random_table;

Tree depth_one_tree() {
  Tree t;
  t.nodes.push_back(TreeNode{.feature = 2, .threshold = 1.5, .left = 1, .right = 2});
  t.nodes.push_back(TreeNode{.value = 0.25});
  t.nodes.push_back(TreeNode{.value = 0.75});
  return t;
}

void expect_same_structure(const Tree& a, const Tree& b) {
  ASSERT_EQ(a.nodes.size(), b.nodes.size());
  for (std::size_t i = 0; i < a.nodes.size(); ++i) {
    EXPECT_EQ(a.nodes[i].feature, b.nodes[i].feature);
    EXPECT_EQ(a.nodes[i].left, b.nodes[i].left);
    EXPECT_EQ(a.nodes[i].right, b.nodes[i].right);
    if (a.nodes[i].is_leaf()) {
      EXPECT_EQ(a.nodes[i].value, b.nodes[i].value);
    } else {
      EXPECT_EQ(a.nodes[i].threshold, b.nodes[i].threshold);
    }
  }
}

TEST(LedgerBytes, ParamVectorOfHundredReals) {
  auto p = ParamVector::zeros({{{"w", 100}}});
  EXPECT_EQ(ledger_bytes(p), 800u);
  EXPECT_EQ(serialize(p).size(), 800u);
}

TEST(LedgerBytes, SingleLeaf) {
  EXPECT_EQ(ledger_bytes(Tree::leaf(0.3)), 9u);
  EXPECT_EQ(serialize(Tree::leaf(0.3)).size(), 9u);
}

TEST(LedgerBytes, DepthOneTree) {
  EXPECT_EQ(ledger_bytes(depth_one_tree()), 31u);
  EXPECT_EQ(serialize(depth_one_tree()).size(), 31u);
}

TEST(LedgerBytes, EnsembleHeaderAndTrailers) {
  TreeEnsemble forest;
  forest.trees = {depth_one_tree(), Tree::leaf(1.0)};
  EXPECT_EQ(ledger_bytes(forest), 4u + 31u + 9u);

  TreeEnsemble weighted = forest;
  weighted.kind = EnsembleKind::kWeightedVote;
  weighted.weights = {0.5, 0.5};
  EXPECT_EQ(ledger_bytes(weighted), 4u + 31u + 9u + 16u);

  TreeEnsemble boosted = forest;
  boosted.kind = EnsembleKind::kBoostedSum;
  EXPECT_EQ(ledger_bytes(boosted), 4u + 31u + 9u + 16u);
}

TEST(LedgerBytes, MatchesSerializedSizeOfFittedModels) {
  const auto data = random_table(200, 4, 3);
  ForestConfig fc;
  fc.n_trees = 7;
  fc.seed = 1;
  const auto forest = fit_random_forest(data, fc);
  EXPECT_EQ(ledger_bytes(forest), serialize(forest).size());
  GbtConfig gc;
  gc.n_rounds = 5;
  const auto gbt = fit_gbt(data, gc);
  EXPECT_EQ(ledger_bytes(gbt), serialize(gbt).size());
  const auto stats = minority_class_stats(data);
  EXPECT_EQ(ledger_bytes(stats), serialize(stats).size());
  const auto scaler = Standardizer::fit(data);
  EXPECT_EQ(ledger_bytes(scaler), serialize(scaler).size());
}

TEST(Encoding, LittleEndianLeaf) {
  const auto bytes = serialize(Tree::leaf(1.0));
  // flag 0, then IEEE-754 1.0 = 0x3FF0000000000000 little-endian.
  EXPECT_EQ(bytes, (Bytes{0, 0, 0, 0, 0, 0, 0, 0xF0, 0x3F}));
}

TEST(RoundTrip, ParamVector) {
  ParamVector p{{{{"w", 3}, {"b", 1}}}, {1.5, -2.25, 1e-300, 3.0}};
  EXPECT_EQ(decode_param_vector(serialize(p), p.layout), p);
}

TEST(RoundTrip, Tree) {
  const auto data = random_table(150, 3, 4);
  const auto t = fit_cart(data);
  expect_same_structure(decode_tree(serialize(t)), t);
}

TEST(RoundTrip, Ensembles) {
  const auto data = random_table(150, 3, 5);
  ForestConfig fc;
  fc.n_trees = 4;
  const auto forest = fit_random_forest(data, fc);
  const auto f2 = decode_ensemble(serialize(forest), EnsembleKind::kForestVote);
  ASSERT_EQ(f2.trees.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) expect_same_structure(f2.trees[i], forest.trees[i]);

  GbtConfig gc;
  gc.n_rounds = 3;
  const auto gbt = fit_gbt(data, gc);
  const auto g2 = decode_ensemble(serialize(gbt), EnsembleKind::kBoostedSum);
  EXPECT_EQ(g2.base_score, gbt.base_score);
  EXPECT_EQ(g2.learning_rate, gbt.learning_rate);
  for (std::size_t i = 0; i < data.size(); ++i) EXPECT_EQ(predict_gbt(g2, data.row(i)), predict_gbt(gbt, data.row(i)));

  TreeEnsemble weighted;
  weighted.kind = EnsembleKind::kWeightedVote;
  weighted.trees = {depth_one_tree(), Tree::leaf(0.0)};
  weighted.weights = {0.75, 0.25};
  EXPECT_EQ(decode_ensemble(serialize(weighted), EnsembleKind::kWeightedVote).weights, weighted.weights);
}

TEST(RoundTrip, ClassStatsAndScaler) {
  ClassStats s{{1.0, 2.0}, {0.5, 0.25}, 7, 40, 0};
  EXPECT_EQ(decode_class_stats(serialize(s)), s);
  Standardizer z{{1.0, -1.0}, {2.0, 3.0}};
  const auto z2 = decode_standardizer(serialize(z));
  EXPECT_EQ(z2.mean, z.mean);
  EXPECT_EQ(z2.scale, z.scale);
}

TEST(Framing, HeaderLayout) {
  const Bytes body{9, 8, 7};
  const auto wire = frame(PayloadKind::kTree, body);
  EXPECT_EQ(wire.size(), kFrameHeaderBytes + 3);
  EXPECT_EQ(wire, (Bytes{2, 3, 0, 0, 0, 9, 8, 7}));
  const auto f = unframe(wire);
  EXPECT_EQ(f.kind, PayloadKind::kTree);
  EXPECT_EQ(f.body, body);
}

TEST(Framing, RejectsMalformedInput) {
  EXPECT_EQ(error_kind_of([] { unframe(Bytes{2, 5, 0, 0, 0, 1}); }), ErrorKind::kParse);   // truncated
  EXPECT_EQ(error_kind_of([] { unframe(Bytes{2, 0, 0, 0, 0, 1}); }), ErrorKind::kParse);   // trailing
  EXPECT_EQ(error_kind_of([] { unframe(Bytes{99, 0, 0, 0, 0}); }), ErrorKind::kParse);     // kind
  EXPECT_EQ(error_kind_of([] { unframe(Bytes{2, 0}); }), ErrorKind::kParse);               // header
}

TEST(Decoding, RejectsMalformedBodies) {
  EXPECT_EQ(error_kind_of([] { decode_tree(Bytes{0, 1, 2}); }), ErrorKind::kParse);
  EXPECT_EQ(error_kind_of([] { decode_tree(Bytes{7, 0, 0, 0, 0, 0, 0, 0, 0}); }), ErrorKind::kParse);
  auto bytes = serialize(Tree::leaf(1.0));
  bytes.push_back(0);
  EXPECT_EQ(error_kind_of([&] { decode_tree(bytes); }), ErrorKind::kParse);
  const ParamLayout layout{{{"w", 2}}};
  EXPECT_EQ(error_kind_of([&] { decode_param_vector(Bytes(8, 0), layout); }), ErrorKind::kParse);
}

TEST(Encoding, StableAcrossCalls) {
  const auto data = random_table(100, 3, 6);
  const auto t = fit_cart(data);
  EXPECT_EQ(serialize(t), serialize(t));
}

}  // namespace
}  // namespace fedtab

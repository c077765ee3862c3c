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

#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "fedtab/dataset.hpp"
#include "fedtab/synthetic.hpp"
#include "test_util.hpp"

namespace fedtab {
namespace {

using testing::counted_table;
using testing::error_kind_of;
using testing::TempFile;

FeatureSchema two_features() {
  FeatureSchema s;
  s.names = {"a", "b"};
  s.kinds = {FeatureKind::kContinuous, FeatureKind::kBinary};
  s.label_name = "y";
  return s;
}

// --- load_csv --------------------------------------------------------------

TEST(LoadCsv, SingleRowIsReadVerbatim) {
  TempFile f("a,b,y\n2.5,1,0\n");
  const auto t = load_csv(f.path(), two_features());
  ASSERT_EQ(t.size(), 1u);
  EXPECT_EQ(t.at(0, 0), 2.5);
  EXPECT_EQ(t.at(0, 1), 1.0);
  EXPECT_EQ(t.labels[0], 0);
}

TEST(LoadCsv, MissingContinuousCellGetsColumnMedian) {
  TempFile f("a,b,y\n1.0,0,0\nNA,1,1\n5.0,0,0\n");
  const auto t = load_csv(f.path(), two_features());
  ASSERT_EQ(t.size(), 3u);
  EXPECT_EQ(t.at(1, 0), 3.0);
}

TEST(LoadCsv, EmptyCellIsMissingToo) {
  TempFile f("a,b,y\n1.0,0,0\n,1,1\n5.0,0,0\n");
  EXPECT_EQ(load_csv(f.path(), two_features()).at(1, 0), 3.0);
}

TEST(LoadCsv, MissingBinaryCellGetsColumnMode) {
  TempFile f("a,b,y\n1,1,0\n2,1,1\n3,0,0\n4,NA,1\n");
  EXPECT_EQ(load_csv(f.path(), two_features()).at(3, 1), 1.0);
}

TEST(LoadCsv, BinaryModeTieGoesToZero) {
  TempFile f("a,b,y\n1,1,0\n2,0,1\n3,NA,0\n");
  EXPECT_EQ(load_csv(f.path(), two_features()).at(2, 1), 0.0);
}

TEST(LoadCsv, DropPolicyRemovesIncompleteRows) {
  TempFile f("a,b,y\n1.0,0,0\nNA,1,1\n5.0,0,0\n");
  CsvOptions o;
  o.missing = MissingPolicy::kDrop;
  const auto t = load_csv(f.path(), two_features(), o);
  ASSERT_EQ(t.size(), 2u);
  EXPECT_EQ(t.at(1, 0), 5.0);
}

TEST(LoadCsv, HeaderIsCaseAndOrderInsensitive) {
  TempFile f("Y,B,A\n1,0,7.5\n");
  const auto t = load_csv(f.path(), two_features());
  EXPECT_EQ(t.at(0, 0), 7.5);
  EXPECT_EQ(t.at(0, 1), 0.0);
  EXPECT_EQ(t.labels[0], 1);
}

TEST(LoadCsv, AliasesAndIgnoredColumns) {
  TempFile f("male,age,education,currentSmoker,cigsPerDay,BPMeds,prevalentStroke,prevalentHyp,diabetes,"
             "totChol,sysBP,diaBP,BMI,heartRate,glucose,TenYearCHD\n"
             "1,39,4,0,0,0,0,0,0,195,106,70,26.97,80,77,0\n"
             "0,46,2,0,0,0,0,0,0,250,121,81,28.73,95,76,0\n"
             "1,48,1,1,20,0,0,0,0,245,127.5,80,25.34,75,70,1\n");
  const auto t = load_csv(f.path(), framingham_schema(), framingham_csv_options());
  ASSERT_EQ(t.size(), 3u);
  EXPECT_EQ(t.n_features(), 14u);
  EXPECT_EQ(t.at(2, 3), 20.0);
  EXPECT_EQ(t.at(2, 9), 127.5);
  EXPECT_EQ(t.labels[2], 1);

  TempFile g("sex,age,currentSmoker,cigsPerDay,BPMeds,prevalentStroke,prevalentHyp,diabetes,"
             "totChol,sysBP,diaBP,BMI,heartRate,glucose,chd\n"
             "1,39,0,0,0,0,0,0,195,106,70,26.97,80,77,1\n");
  const auto u = load_csv(g.path(), framingham_schema(), framingham_csv_options());
  EXPECT_EQ(u.at(0, 0), 1.0);
  EXPECT_EQ(u.labels[0], 1);
}

TEST(LoadCsv, Errors) {
  EXPECT_EQ(error_kind_of([] { load_csv("/nonexistent/fedtab.csv", two_features()); }), ErrorKind::kIo);
  {
    TempFile f("a,b,c,y\n1,0,0,0\n");
    EXPECT_EQ(error_kind_of([&] { load_csv(f.path(), two_features()); }), ErrorKind::kSchema);
  }
  {
    TempFile f("a,y\n1,0\n");
    EXPECT_EQ(error_kind_of([&] { load_csv(f.path(), two_features()); }), ErrorKind::kSchema);
  }
  {
    TempFile f("a,b,y\nabc,0,0\n");
    EXPECT_EQ(error_kind_of([&] { load_csv(f.path(), two_features()); }), ErrorKind::kParse);
  }
  {
    TempFile f("a,b,y\n1,0,2\n");
    EXPECT_EQ(error_kind_of([&] { load_csv(f.path(), two_features()); }), ErrorKind::kSchema);
  }
  {
    TempFile f("a,b,y\n1,0.5,1\n");
    EXPECT_EQ(error_kind_of([&] { load_csv(f.path(), two_features()); }), ErrorKind::kSchema);
  }
  {
    TempFile f("a,b,y\n1,0\n");
    EXPECT_EQ(error_kind_of([&] { load_csv(f.path(), two_features()); }), ErrorKind::kParse);
  }
  {
    TempFile f("a,a,b,y\n1,1,0,0\n");
    EXPECT_EQ(error_kind_of([&] { load_csv(f.path(), two_features()); }), ErrorKind::kSchema);
  }
}

TEST(LoadCsv, SaveLoadRoundTrip) {
  const auto t = make_synthetic_framingham({.rows = 50, .seed = 3});
  TempFile f("");
  save_csv(f.path(), t);
  const auto u = load_csv(f.path(), framingham_schema(), framingham_csv_options());
  EXPECT_EQ(u.values, t.values);
  EXPECT_EQ(u.labels, t.labels);
}

TEST(Synthetic, FraminghamShape) {
  const auto t = make_synthetic_framingham({});
  EXPECT_EQ(t.size(), 4238u);
  EXPECT_EQ(t.n_features(), 14u);
  EXPECT_NEAR(t.positive_rate(), 0.152, 0.02);
  for (std::size_t i = 0; i < t.size(); ++i) {
    for (std::size_t j = 0; j < t.n_features(); ++j) {
      if (t.schema.kinds[j] == FeatureKind::kBinary) {
        ASSERT_TRUE(t.at(i, j) == 0.0 || t.at(i, j) == 1.0);
      }
    }
  }
  EXPECT_EQ(make_synthetic_framingham({}).fingerprint(), t.fingerprint());
}

// --- stratified_split --------------------------------------------------------

TEST(StratifiedSplit, FraminghamSizes) {
  const auto [train, test] = stratified_split(make_synthetic_framingham({}), 0.2, 1);
  EXPECT_EQ(train.size(), 3390u);
  EXPECT_EQ(test.size(), 848u);
}

TEST(StratifiedSplit, BalancedTenRows) {
  const auto [train, test] = stratified_split(counted_table(5, 5), 0.2, 9);
  EXPECT_EQ(test.count(1), 1u);
  EXPECT_EQ(test.count(0), 1u);
  EXPECT_EQ(train.size(), 8u);
}

TEST(StratifiedSplit, FifteenPositivesOfHundred) {
  const auto [train, test] = stratified_split(counted_table(85, 15), 0.2, 4);
  EXPECT_EQ(test.size(), 20u);
  EXPECT_EQ(test.count(1), 3u);
  EXPECT_EQ(train.count(1), 12u);
}

TEST(StratifiedSplit, SingleClassIsRejected) {
  EXPECT_EQ(error_kind_of([] { stratified_split(counted_table(10, 0), 0.2, 1); }), ErrorKind::kSingleClass);
}

TEST(StratifiedSplit, PropertiesOverSeeds) {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const std::size_t n_neg = 20 + seed * 7 % 90, n_pos = 3 + seed * 5 % 40;
    const auto t = counted_table(n_neg, n_pos);
    const double frac = 0.1 + 0.02 * static_cast<double>(seed % 20);
    const auto [train, test] = stratified_split(t, frac, seed);
    ASSERT_EQ(test.size(), static_cast<std::size_t>(std::llround(frac * static_cast<double>(t.size()))));
    ASSERT_EQ(train.size() + test.size(), t.size());
    const double overall = t.positive_rate();
    ASSERT_LE(std::abs(test.positive_rate() - overall), 1.0 / static_cast<double>(test.size()) + 1e-12);
    ASSERT_LE(std::abs(train.positive_rate() - overall), 1.0 / static_cast<double>(train.size()) + 1e-12);
    // Disjoint and complete: row i holds value i in column 0.
    std::set<double> ids;
    for (const auto* part : {&train, &test}) {
      for (std::size_t i = 0; i < part->size(); ++i) ids.insert(part->at(i, 0));
    }
    ASSERT_EQ(ids.size(), t.size());
    // Deterministic.
    const auto again = stratified_split(t, frac, seed);
    ASSERT_EQ(again.second.values, test.values);
  }
}

// --- partition_clients -------------------------------------------------------

TEST(PartitionClients, FraminghamThreeHospitals) {
  const auto data = make_synthetic_framingham({});
  const auto [train, test] = stratified_split(data, 0.2, 1);
  const auto parts = partition_clients(train, 3, 1);
  ASSERT_EQ(parts.size(), 3u);
  for (const auto& p : parts) EXPECT_EQ(p.size(), 1130u);
}

TEST(PartitionClients, TwoRowsTwoClients) {
  const auto parts = partition_clients(counted_table(1, 1), 2, 5);
  ASSERT_EQ(parts.size(), 2u);
  EXPECT_EQ(parts[0].size(), 1u);
  EXPECT_EQ(parts[1].size(), 1u);
  EXPECT_EQ(parts[0].count(1) + parts[1].count(1), 1u);
}

TEST(PartitionClients, NineRowsThreePositives) {
  const auto parts = partition_clients(counted_table(6, 3), 3, 2);
  for (const auto& p : parts) EXPECT_EQ(p.count(1), 1u);
}

TEST(PartitionClients, Errors) {
  EXPECT_EQ(error_kind_of([] { partition_clients(counted_table(5, 5), 1, 0); }), ErrorKind::kInvalidArgument);
  EXPECT_EQ(error_kind_of([] { partition_clients(counted_table(1, 1), 3, 0); }), ErrorKind::kInvalidArgument);
}

TEST(PartitionClients, StratificationPropertyOverSeeds) {
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    const std::size_t n_clients = 2 + seed % 5;
    const auto t = counted_table(10 + seed * 13 % 200, n_clients + seed * 3 % 50);
    const auto parts = partition_clients(t, n_clients, seed);
    std::size_t lo = t.size(), hi = 0, total = 0;
    std::multiset<double> ids;
    for (const auto& p : parts) {
      lo = std::min(lo, p.size());
      hi = std::max(hi, p.size());
      total += p.size();
      ASSERT_LE(std::abs(p.positive_rate() - t.positive_rate()), 1.0 / static_cast<double>(p.size()) + 1e-12)
          << "seed " << seed;
      for (std::size_t i = 0; i < p.size(); ++i) ids.insert(p.at(i, 0));
    }
    ASSERT_LE(hi - lo, 1u);
    ASSERT_EQ(total, t.size());
    ASSERT_EQ(std::set<double>(ids.begin(), ids.end()).size(), t.size());
    const auto again = partition_clients(t, n_clients, seed);
    for (std::size_t c = 0; c < parts.size(); ++c) ASSERT_EQ(again[c].values, parts[c].values);
  }
}

// --- DataTable basics ----------------------------------------------------------

TEST(DataTable, RejectsBadRows) {
  DataTable t(FeatureSchema::continuous(2));
  const double one[] = {1.0};
  const double two[] = {1.0, 2.0};
  EXPECT_THROW(t.add_row(one, 0), Error);
  EXPECT_THROW(t.add_row(two, 3), Error);
  t.add_row(two, 1);
  EXPECT_EQ(t.size(), 1u);
}

TEST(DataTable, SchemaValidation) {
  FeatureSchema s;
  s.names = {"a", "y"};
  s.kinds = {FeatureKind::kContinuous, FeatureKind::kContinuous};
  s.label_name = "y";
  EXPECT_EQ(error_kind_of([&] { s.validate(); }), ErrorKind::kSchema);
  s.names = {"a"};
  EXPECT_EQ(error_kind_of([&] { s.validate(); }), ErrorKind::kSchema);
}

}  // namespace
}  // namespace fedtab

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
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fedtab/error.hpp"
#include "fedtab/rng.hpp"

namespace fedtab {

enum class FeatureKind { kContinuous, kBinary };

/// Ordered feature names and kinds plus the name of the binary target.
struct FeatureSchema {
  std::vector<std::string> names;
  std::vector<FeatureKind> kinds;
  std::string label_name = "label";

  std::size_t size() const { return names.size(); }

  void validate() const {
    require(names.size() == kinds.size(), ErrorKind::kSchema,
            "schema: names and kinds have different lengths");
    require(!label_name.empty(), ErrorKind::kSchema, "schema: empty label name");
    for (const auto& n : names) {
      require(n != label_name, ErrorKind::kSchema, "schema: label '" + n + "' listed as a feature");
    }
  }

  /// All-continuous schema with generated names f0, f1, ...
  static FeatureSchema continuous(std::size_t n_features) {
    FeatureSchema s;
    for (std::size_t i = 0; i < n_features; ++i) {
      s.names.push_back("f" + std::to_string(i));
      s.kinds.push_back(FeatureKind::kContinuous);
    }
    return s;
  }

  friend bool operator==(const FeatureSchema&, const FeatureSchema&) = default;
};

/// The 14 Framingham predictors used throughout (the raw file's
/// `education` column is not a predictor and is ignored on load).
inline FeatureSchema framingham_schema() {
  using K = FeatureKind;
  FeatureSchema s;
  const std::pair<const char*, K> cols[] = {
      {"male", K::kBinary},          {"age", K::kContinuous},
      {"currentSmoker", K::kBinary}, {"cigsPerDay", K::kContinuous},
      {"BPMeds", K::kBinary},        {"prevalentStroke", K::kBinary},
      {"prevalentHyp", K::kBinary},  {"diabetes", K::kBinary},
      {"totChol", K::kContinuous},   {"sysBP", K::kContinuous},
      {"diaBP", K::kContinuous},     {"BMI", K::kContinuous},
      {"heartRate", K::kContinuous}, {"glucose", K::kContinuous},
  };
  for (const auto& [name, kind] : cols) {
    s.names.emplace_back(name);
    s.kinds.push_back(kind);
  }
  s.label_name = "TenYearCHD";
  return s;
}

/// Row-major numeric table with a binary label per row.
struct DataTable {
  FeatureSchema schema;
  std::vector<double> values;
  std::vector<int> labels;

  DataTable() = default;
  explicit DataTable(FeatureSchema s) : schema(std::move(s)) {}

  static DataTable from_rows(const std::vector<std::vector<double>>& rows,
                             const std::vector<int>& labels,
                             std::optional<FeatureSchema> schema = std::nullopt) {
    require(rows.size() == labels.size(), ErrorKind::kInvalidArgument,
            "from_rows: rows and labels differ in length");
    const std::size_t d = rows.empty() ? (schema ? schema->size() : 0) : rows.front().size();
    DataTable t(schema ? *schema : FeatureSchema::continuous(d));
    require(t.schema.size() == d, ErrorKind::kSchema, "from_rows: schema width mismatch");
    for (std::size_t i = 0; i < rows.size(); ++i) t.add_row(rows[i], labels[i]);
    return t;
  }

  std::size_t n_features() const { return schema.size(); }
  std::size_t size() const { return labels.size(); }
  bool empty() const { return labels.empty(); }

  std::span<const double> row(std::size_t i) const {
    return {values.data() + i * n_features(), n_features()};
  }
  std::span<double> row(std::size_t i) { return {values.data() + i * n_features(), n_features()}; }

  double at(std::size_t i, std::size_t j) const { return values[i * n_features() + j]; }

  void add_row(std::span<const double> x, int label) {
    require(x.size() == n_features(), ErrorKind::kSchema, "add_row: width mismatch");
    require(label == 0 || label == 1, ErrorKind::kSchema, "add_row: label outside {0,1}");
    values.insert(values.end(), x.begin(), x.end());
    labels.push_back(label);
  }

  std::size_t count(int label) const {
    return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), label));
  }

  double positive_rate() const {
    return empty() ? 0.0 : static_cast<double>(count(1)) / static_cast<double>(size());
  }

  bool has_both_classes() const { return count(0) > 0 && count(1) > 0; }

  DataTable empty_like() const { return DataTable(schema); }

  DataTable subset(std::span<const std::size_t> indices) const {
    DataTable out(schema);
    out.values.reserve(indices.size() * n_features());
    out.labels.reserve(indices.size());
    for (auto i : indices) out.add_row(row(i), labels[i]);
    return out;
  }

  std::vector<std::size_t> indices_of(int label) const {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < size(); ++i) {
      if (labels[i] == label) idx.push_back(i);
    }
    return idx;
  }

  /// Appends all rows of `other`, which must share this schema.
  void append(const DataTable& other) {
    require(other.schema == schema, ErrorKind::kSchema, "append: schema mismatch");
    values.insert(values.end(), other.values.begin(), other.values.end());
    labels.insert(labels.end(), other.labels.begin(), other.labels.end());
  }

  /// FNV-1a over labels and the raw bit patterns of every value.
  std::uint64_t fingerprint() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto feed = [&h](std::uint64_t v) {
      for (int b = 0; b < 8; ++b) {
        h ^= (v >> (8 * b)) & 0xffU;
        h *= 0x100000001b3ULL;
      }
    };
    for (double v : values) {
      std::uint64_t bits;
      static_assert(sizeof(bits) == sizeof(v));
      std::memcpy(&bits, &v, sizeof(v));
      feed(bits);
    }
    for (int l : labels) feed(static_cast<std::uint64_t>(l));
    return h;
  }
};

inline void require_both_classes(const DataTable& table, std::string_view op) {
  require(table.has_both_classes(), ErrorKind::kSingleClass,
          std::string(op) + ": table must contain both classes");
}

// ---------------------------------------------------------------------------
// CSV ingestion

enum class MissingPolicy { kImpute, kDrop };

struct CsvOptions {
  /// Lower-cased header name -> schema name (feature or label).
  std::map<std::string, std::string> aliases;
  /// Header names (case-insensitive) that are present in the file but not used.
  std::vector<std::string> ignored_columns;
  std::vector<std::string> missing_markers = {"NA", ""};
  MissingPolicy missing = MissingPolicy::kImpute;
};

inline CsvOptions framingham_csv_options() {
  CsvOptions o;
  o.ignored_columns = {"education"};
  o.aliases = {{"sex", "male"},          {"is_smoking", "currentSmoker"},
               {"cigs_per_day", "cigsPerDay"}, {"bp_meds", "BPMeds"},
               {"tot_chol", "totChol"},  {"sys_bp", "sysBP"},
               {"dia_bp", "diaBP"},      {"heart_rate", "heartRate"},
               {"ten_year_chd", "TenYearCHD"}, {"chd", "TenYearCHD"}};
  return o;
}

namespace detail {

inline std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

/// Splits one CSV record; handles double-quoted fields with "" escapes.
inline std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur.push_back('"');
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  fields.emplace_back(trim(cur));
  return fields;
}

inline std::optional<double> parse_number(std::string_view s) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace detail

/// Reads a CSV with a header row into a table laid out per `schema`.
/// Missing cells are imputed (continuous: column median, binary: column
/// mode, ties to 0) or their rows dropped, per `options.missing`.
inline DataTable load_csv(const std::string& path, const FeatureSchema& schema,
                          const CsvOptions& options = {}) {
  schema.validate();
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::kIo, "load_csv: cannot open '" + path + "'");

  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorKind::kParse,
          "load_csv: '" + path + "' has no header row");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = detail::split_csv_line(line);

  std::map<std::string, std::size_t> schema_pos;  // lower-cased name -> slot; label at size()
  for (std::size_t j = 0; j < schema.size(); ++j) schema_pos[detail::lower(schema.names[j])] = j;
  schema_pos[detail::lower(schema.label_name)] = schema.size();
  std::map<std::string, std::string> aliases;
  for (const auto& [k, v] : options.aliases) aliases[detail::lower(k)] = detail::lower(v);
  std::vector<std::string> ignored;
  for (const auto& c : options.ignored_columns) ignored.push_back(detail::lower(c));

  constexpr std::size_t kSkip = static_cast<std::size_t>(-1);
  std::vector<std::size_t> slot_of_column(header.size(), kSkip);
  std::vector<bool> seen(schema.size() + 1, false);
  for (std::size_t c = 0; c < header.size(); ++c) {
    std::string key = detail::lower(header[c]);
    if (auto a = aliases.find(key); a != aliases.end()) key = a->second;
    if (auto it = schema_pos.find(key); it != schema_pos.end()) {
      require(!seen[it->second], ErrorKind::kSchema,
              "load_csv: duplicate column '" + header[c] + "'");
      seen[it->second] = true;
      slot_of_column[c] = it->second;
    } else if (std::find(ignored.begin(), ignored.end(), key) == ignored.end()) {
      fail(ErrorKind::kSchema, "load_csv: unknown column '" + header[c] + "'");
    }
  }
  for (std::size_t j = 0; j <= schema.size(); ++j) {
    const auto& name = j < schema.size() ? schema.names[j] : schema.label_name;
    require(seen[j], ErrorKind::kSchema, "load_csv: missing column '" + name + "'");
  }

  const std::size_t d = schema.size();
  std::vector<std::vector<std::optional<double>>> cells;
  std::vector<int> labels;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::split_csv_line(line);
    require(fields.size() == header.size(), ErrorKind::kParse,
            "load_csv: line " + std::to_string(line_no) + " has " +
                std::to_string(fields.size()) + " fields, expected " +
                std::to_string(header.size()));
    std::vector<std::optional<double>> row(d);
    std::optional<int> label;
    for (std::size_t c = 0; c < fields.size(); ++c) {
      const std::size_t slot = slot_of_column[c];
      if (slot == kSkip) continue;
      const bool missing = std::find(options.missing_markers.begin(), options.missing_markers.end(),
                                     fields[c]) != options.missing_markers.end();
      std::optional<double> v;
      if (!missing) {
        v = detail::parse_number(fields[c]);
        require(v.has_value(), ErrorKind::kParse,
                "load_csv: line " + std::to_string(line_no) + ", column '" + header[c] +
                    "': non-numeric value '" + fields[c] + "'");
      }
      if (slot == d) {
        require(v.has_value() && (*v == 0.0 || *v == 1.0), ErrorKind::kSchema,
                "load_csv: line " + std::to_string(line_no) + ": label value '" + fields[c] +
                    "' outside {0,1}");
        label = static_cast<int>(*v);
      } else {
        if (v && schema.kinds[slot] == FeatureKind::kBinary) {
          require(*v == 0.0 || *v == 1.0, ErrorKind::kSchema,
                  "load_csv: line " + std::to_string(line_no) + ", binary column '" +
                      header[c] + "' holds '" + fields[c] + "'");
        }
        row[slot] = v;
      }
    }
    cells.push_back(std::move(row));
    labels.push_back(*label);
  }

  std::vector<double> fill(d, 0.0);
  if (options.missing == MissingPolicy::kImpute) {
    for (std::size_t j = 0; j < d; ++j) {
      std::vector<double> observed;
      for (const auto& r : cells) {
        if (r[j]) observed.push_back(*r[j]);
      }
      if (observed.size() == cells.size()) continue;
      require(!observed.empty(), ErrorKind::kSchema,
              "load_csv: column '" + schema.names[j] + "' has no observed values");
      if (schema.kinds[j] == FeatureKind::kBinary) {
        const auto ones = std::count(observed.begin(), observed.end(), 1.0);
        fill[j] = 2 * static_cast<std::size_t>(ones) > observed.size() ? 1.0 : 0.0;
      } else {
        fill[j] = detail::median(std::move(observed));
      }
    }
  }

  DataTable table(schema);
  table.values.reserve(cells.size() * d);
  std::vector<double> buf(d);
  for (std::size_t i = 0; i < cells.size(); ++i) {
    bool complete = true;
    for (std::size_t j = 0; j < d; ++j) {
      complete = complete && cells[i][j].has_value();
      buf[j] = cells[i][j].value_or(fill[j]);
    }
    if (!complete && options.missing == MissingPolicy::kDrop) continue;
    table.add_row(buf, labels[i]);
  }
  return table;
}

/// Writes `table` as CSV (features then label), values in shortest
/// round-trip form.
inline void save_csv(const std::string& path, const DataTable& table) {
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorKind::kIo, "save_csv: cannot open '" + path + "'");
  for (const auto& n : table.schema.names) out << n << ',';
  out << table.schema.label_name << '\n';
  char buf[64];
  for (std::size_t i = 0; i < table.size(); ++i) {
    for (double v : table.row(i)) {
      auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
      out.write(buf, end - buf);
      out << ',';
    }
    out << table.labels[i] << '\n';
  }
}

// ---------------------------------------------------------------------------
// Splitting and partitioning

namespace detail {

inline std::vector<std::size_t> shuffled_indices_of(const DataTable& t, int label, Rng& rng) {
  auto idx = t.indices_of(label);
  rng.shuffle(std::span(idx));
  return idx;
}

}  // namespace detail

/// Stratified hold-out split. |test| = round(test_fraction * |table|) and
/// the test set holds round(test_fraction * positives) positives. Both
/// outputs keep the input row order.
inline std::pair<DataTable, DataTable> stratified_split(const DataTable& table,
                                                        double test_fraction,
                                                        std::uint64_t seed) {
  require(test_fraction > 0.0 && test_fraction < 1.0, ErrorKind::kInvalidArgument,
          "stratified_split: test_fraction must lie in (0,1)");
  require_both_classes(table, "stratified_split");

  Rng rng(derive_seed(seed, {0x5117}));
  const auto pos = detail::shuffled_indices_of(table, 1, rng);
  const auto neg = detail::shuffled_indices_of(table, 0, rng);
  const auto n_test = static_cast<std::size_t>(
      std::llround(test_fraction * static_cast<double>(table.size())));
  const auto pos_test = std::min<std::size_t>(
      pos.size(), static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(pos.size()))));
  const std::size_t neg_test = std::min(neg.size(), n_test - std::min(n_test, pos_test));

  std::vector<bool> in_test(table.size(), false);
  for (std::size_t i = 0; i < pos_test; ++i) in_test[pos[i]] = true;
  for (std::size_t i = 0; i < neg_test; ++i) in_test[neg[i]] = true;

  std::vector<std::size_t> train_idx, test_idx;
  for (std::size_t i = 0; i < table.size(); ++i) (in_test[i] ? test_idx : train_idx).push_back(i);
  return {table.subset(train_idx), table.subset(test_idx)};
}

/// Deals shuffled positives, then shuffled negatives, round-robin across
/// clients with one running counter, so the remainder of each class lands
/// on the next clients in index order and sizes differ by at most one.
inline std::vector<DataTable> partition_clients(const DataTable& train, std::size_t n_clients,
                                                std::uint64_t seed) {
  require(n_clients >= 2, ErrorKind::kInvalidArgument, "partition_clients: n_clients must be >= 2");
  require(train.size() >= n_clients, ErrorKind::kInvalidArgument,
          "partition_clients: fewer rows than clients");

  Rng rng(derive_seed(seed, {0x9a27}));
  auto order = detail::shuffled_indices_of(train, 1, rng);
  const auto neg = detail::shuffled_indices_of(train, 0, rng);
  order.insert(order.end(), neg.begin(), neg.end());

  std::vector<std::vector<std::size_t>> assigned(n_clients);
  for (std::size_t j = 0; j < order.size(); ++j) assigned[j % n_clients].push_back(order[j]);

  std::vector<DataTable> parts;
  parts.reserve(n_clients);
  for (auto& idx : assigned) {
    std::sort(idx.begin(), idx.end());
    parts.push_back(train.subset(idx));
  }
  return parts;
}

}  // namespace fedtab

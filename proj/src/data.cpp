#include "ftm/data.hpp"

#include "ftm/rng.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

namespace ftm {

namespace {

FeatureSpec::Kind parse_kind(const std::string& s) {
  if (s == "continuous") return FeatureSpec::Kind::continuous;
  if (s == "categorical") return FeatureSpec::Kind::categorical;
  throw std::invalid_argument("schema: unknown feature kind '" + s + "'");
}

// split a CSV payload into records, honoring quotes
std::vector<std::vector<std::string>> parse_csv(const std::string& text, char delim) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> fields;
  std::string cur;
  bool in_quotes = false;
  bool field_started = false;

  auto end_field = [&]() {
    fields.push_back(cur);
    cur.clear();
    field_started = false;
  };
  auto end_record = [&]() {
    end_field();
    if (fields.size() > 1 || !fields[0].empty()) records.push_back(fields);
    fields.clear();
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char ch = text[i];
    if (in_quotes) {
      if (ch == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        cur += ch;
      }
      continue;
    }
    if (ch == delim) {
      end_field();
      continue;
    }
    switch (ch) {
      case '"':
        in_quotes = true;
        field_started = true;
        break;
      case '\r':
        if (i + 1 < text.size() && text[i + 1] == '\n') ++i;
        end_record();
        break;
      case '\n':
        end_record();
        break;
      default:
        cur += ch;
        field_started = true;
        break;
    }
  }
  if (field_started || !cur.empty() || !fields.empty()) end_record();
  return records;
}

std::string trimmed(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t");
  return s.substr(a, b - a + 1);
}

double parse_double(const std::string& cell, long long row, const std::string& column) {
  std::size_t pos = 0;
  double value = 0.0;
  bool ok = true;
  try {
    value = std::stod(cell, &pos);
  } catch (const std::exception&) {
    ok = false;
  }
  if (!ok || pos != cell.size()) {
    std::ostringstream msg;
    msg << "csv: cannot parse '" << cell << "' as a number (row " << row << ", column '"
        << column << "')";
    throw std::runtime_error(msg.str());
  }
  return value;
}

int find_column(const std::vector<std::string>& header, const std::string& name) {
  for (int i = 0; i < static_cast<int>(header.size()); ++i)
    if (header[i] == name) return i;
  throw std::runtime_error("csv: missing column '" + name + "'");
}

int match_positive(const std::string& cell, const std::string& exact,
                   const std::vector<std::string>& any, const std::optional<double>& at_least,
                   long long row, const std::string& column) {
  if (at_least) return parse_double(cell, row, column) >= *at_least ? 1 : 0;
  if (!any.empty())
    return std::find(any.begin(), any.end(), cell) != any.end() ? 1 : 0;
  return cell == exact ? 1 : 0;
}

std::vector<int> used_column_ids(const std::vector<std::string>& header, const DataSchema& schema) {
  std::vector<int> ids;
  ids.push_back(find_column(header, schema.label_column));
  ids.push_back(find_column(header, schema.sensitive_column));
  for (const auto& f : schema.features) ids.push_back(find_column(header, f.column));
  return ids;
}

std::vector<int> floor_split_indices(int n, double train_fraction, std::uint64_t seed,
                                     std::vector<int>* test_out) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw std::invalid_argument("split: train fraction must lie in (0, 1)");
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  auto g = make_rng(seed, "split");
  shuffle_in_place(idx, g);
  const int train_n = static_cast<int>(std::floor(train_fraction * n));
  std::vector<int> train(idx.begin(), idx.begin() + train_n);
  std::vector<int> test(idx.begin() + train_n, idx.end());
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  *test_out = std::move(test);
  return train;
}

}  // namespace

namespace {

void read_positive_rule(const nlohmann::json& j, const std::string& role, std::string& column,
                        std::string& exact, std::vector<std::string>& any,
                        std::optional<double>& at_least) {
  const nlohmann::json& node = j.at(role);
  column = node.at("column").get<std::string>();
  int rules = 0;
  if (node.contains("positive")) {
    exact = node.at("positive").get<std::string>();
    ++rules;
  }
  if (node.contains("positive_any")) {
    any = node.at("positive_any").get<std::vector<std::string>>();
    if (any.empty()) throw std::invalid_argument("schema: " + role + ".positive_any is empty");
    ++rules;
  }
  if (node.contains("positive_at_least")) {
    at_least = node.at("positive_at_least").get<double>();
    ++rules;
  }
  if (rules != 1)
    throw std::invalid_argument("schema: " + role +
                                " needs exactly one of positive, positive_any, "
                                "positive_at_least");
}

nlohmann::json write_positive_rule(const std::string& column, const std::string& exact,
                                   const std::vector<std::string>& any,
                                   const std::optional<double>& at_least) {
  nlohmann::json node{{"column", column}};
  if (at_least)
    node["positive_at_least"] = *at_least;
  else if (!any.empty())
    node["positive_any"] = any;
  else
    node["positive"] = exact;
  return node;
}

}  // namespace

DataSchema DataSchema::from_json(const nlohmann::json& j) {
  DataSchema s;
  read_positive_rule(j, "label", s.label_column, s.label_positive, s.label_positive_any,
                     s.label_positive_at_least);
  read_positive_rule(j, "sensitive", s.sensitive_column, s.sensitive_positive,
                     s.sensitive_positive_any, s.sensitive_positive_at_least);
  if (j.contains("delimiter")) {
    const std::string d = j.at("delimiter").get<std::string>();
    if (d.size() != 1 || d[0] == '"' || d[0] == '\n' || d[0] == '\r')
      throw std::invalid_argument("schema: delimiter must be one plain character");
    s.delimiter = d[0];
  }
  for (const auto& f : j.at("features")) {
    FeatureSpec spec;
    spec.column = f.at("column").get<std::string>();
    spec.kind = parse_kind(f.at("kind").get<std::string>());
    s.features.push_back(std::move(spec));
  }
  if (j.contains("missing")) s.missing_tokens = j.at("missing").get<std::vector<std::string>>();
  if (s.features.empty()) throw std::invalid_argument("schema: no feature columns");
  return s;
}

nlohmann::json DataSchema::to_json() const {
  nlohmann::json j;
  j["label"] = write_positive_rule(label_column, label_positive, label_positive_any,
                                   label_positive_at_least);
  j["sensitive"] = write_positive_rule(sensitive_column, sensitive_positive,
                                       sensitive_positive_any, sensitive_positive_at_least);
  if (delimiter != ',') j["delimiter"] = std::string(1, delimiter);
  j["features"] = nlohmann::json::array();
  for (const auto& f : features)
    j["features"].push_back(
        {{"column", f.column},
         {"kind", f.kind == FeatureSpec::Kind::continuous ? "continuous" : "categorical"}});
  j["missing"] = missing_tokens;
  return j;
}

DataSchema DataSchema::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("schema: cannot open '" + path + "'");
  nlohmann::json j;
  in >> j;
  return from_json(j);
}

RawTable load_csv(const std::string& path, const DataSchema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("csv: cannot open '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  auto records = parse_csv(buffer.str(), schema.delimiter);
  if (records.empty()) throw std::runtime_error("csv: '" + path + "' is empty");

  RawTable table;
  table.columns = records[0];
  for (auto& c : table.columns) c = trimmed(c);
  const std::vector<int> used = used_column_ids(table.columns, schema);
  const std::set<std::string> missing(schema.missing_tokens.begin(), schema.missing_tokens.end());

  for (std::size_t r = 1; r < records.size(); ++r) {
    auto& rec = records[r];
    if (rec.size() != table.columns.size()) {
      std::ostringstream msg;
      msg << "csv: row " << r << " has " << rec.size() << " fields, expected "
          << table.columns.size();
      throw std::runtime_error(msg.str());
    }
    for (auto& cell : rec) cell = trimmed(cell);
    bool drop = false;
    for (const int id : used)
      if (missing.count(rec[id])) {
        drop = true;
        break;
      }
    if (drop) {
      table.dropped_missing++;
      continue;
    }
    table.rows.push_back(std::move(rec));
  }

  // validate continuous cells eagerly so errors carry the file position
  for (const auto& f : schema.features) {
    if (f.kind != FeatureSpec::Kind::continuous) continue;
    const int id = find_column(table.columns, f.column);
    for (std::size_t r = 0; r < table.rows.size(); ++r)
      parse_double(table.rows[r][id], static_cast<long long>(r), f.column);
  }
  return table;
}

std::pair<RawTable, RawTable> split_raw(const RawTable& table, double train_fraction,
                                        std::uint64_t seed) {
  std::vector<int> test_idx;
  const std::vector<int> train_idx =
      floor_split_indices(static_cast<int>(table.rows.size()), train_fraction, seed, &test_idx);
  RawTable train, test;
  train.columns = test.columns = table.columns;
  for (const int i : train_idx) train.rows.push_back(table.rows[i]);
  for (const int i : test_idx) test.rows.push_back(table.rows[i]);
  return {std::move(train), std::move(test)};
}

Preprocessor Preprocessor::fit(const RawTable& table, const DataSchema& schema) {
  if (table.rows.empty()) throw std::invalid_argument("preprocess: empty table");
  Preprocessor p;
  p.schema_ = schema;
  for (const auto& f : schema.features) {
    const int id = find_column(table.columns, f.column);
    if (f.kind == FeatureSpec::Kind::continuous) {
      Range r{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
      for (std::size_t row = 0; row < table.rows.size(); ++row) {
        const double v = parse_double(table.rows[row][id], static_cast<long long>(row), f.column);
        r.lo = std::min(r.lo, v);
        r.hi = std::max(r.hi, v);
      }
      p.ranges_[f.column] = r;
    } else {
      std::set<std::string> values;
      for (const auto& row : table.rows) values.insert(row[id]);
      p.categories_[f.column] = std::vector<std::string>(values.begin(), values.end());
    }
  }
  return p;
}

Dataset Preprocessor::transform(const RawTable& table) const {
  const int n = static_cast<int>(table.rows.size());
  int d = 0;
  for (const auto& f : schema_.features)
    d += f.kind == FeatureSpec::Kind::continuous
             ? 1
             : static_cast<int>(categories_.at(f.column).size());

  Dataset out;
  out.features = Eigen::MatrixXd::Zero(n, d);
  out.labels = Eigen::VectorXi::Zero(n);
  out.sensitive = Eigen::VectorXi::Zero(n);

  for (const auto& f : schema_.features) {
    if (f.kind == FeatureSpec::Kind::continuous) {
      out.feature_names.push_back(f.column);
    } else {
      for (const auto& c : categories_.at(f.column))
        out.feature_names.push_back(f.column + "=" + c);
    }
  }

  const int label_id = find_column(table.columns, schema_.label_column);
  const int sens_id = find_column(table.columns, schema_.sensitive_column);

  for (int row = 0; row < n; ++row) {
    const auto& rec = table.rows[row];
    int col = 0;
    for (const auto& f : schema_.features) {
      const int id = find_column(table.columns, f.column);
      if (f.kind == FeatureSpec::Kind::continuous) {
        const Range& r = ranges_.at(f.column);
        const double v = parse_double(rec[id], row, f.column);
        out.features(row, col) = (r.hi > r.lo) ? (v - r.lo) / (r.hi - r.lo) : 0.0;
        ++col;
      } else {
        const auto& cats = categories_.at(f.column);
        const auto it = std::lower_bound(cats.begin(), cats.end(), rec[id]);
        if (it == cats.end() || *it != rec[id]) {
          std::ostringstream msg;
          msg << "preprocess: unseen category '" << rec[id] << "' in column '" << f.column
              << "' (row " << row << ")";
          throw std::runtime_error(msg.str());
        }
        out.features(row, col + static_cast<int>(it - cats.begin())) = 1.0;
        col += static_cast<int>(cats.size());
      }
    }
    out.labels(row) = match_positive(rec[label_id], schema_.label_positive,
                                     schema_.label_positive_any, schema_.label_positive_at_least,
                                     row, schema_.label_column);
    out.sensitive(row) =
        match_positive(rec[sens_id], schema_.sensitive_positive, schema_.sensitive_positive_any,
                       schema_.sensitive_positive_at_least, row, schema_.sensitive_column);
  }

  std::ostringstream prov;
  prov << "csv rows=" << n << " dim=" << d << " dropped_missing=" << table.dropped_missing;
  out.provenance = prov.str();
  return out;
}

std::pair<Dataset, Dataset> split_dataset(const Dataset& data, double train_fraction,
                                          std::uint64_t seed) {
  std::vector<int> test_idx;
  const std::vector<int> train_idx =
      floor_split_indices(data.rows(), train_fraction, seed, &test_idx);
  return {subset_rows(data, train_idx), subset_rows(data, test_idx)};
}

Dataset subset_rows(const Dataset& data, const std::vector<int>& idx) {
  Dataset out;
  out.features.resize(static_cast<int>(idx.size()), data.dim());
  out.labels.resize(static_cast<int>(idx.size()));
  out.sensitive.resize(static_cast<int>(idx.size()));
  for (int k = 0; k < static_cast<int>(idx.size()); ++k) {
    out.features.row(k) = data.features.row(idx[k]);
    out.labels(k) = data.labels(idx[k]);
    out.sensitive(k) = data.sensitive(idx[k]);
  }
  out.feature_names = data.feature_names;
  out.provenance = data.provenance;
  return out;
}

Dataset make_imbalanced(const Dataset& data, double minority_fraction, std::uint64_t seed) {
  if (!(minority_fraction > 0.0 && minority_fraction < 1.0))
    throw std::invalid_argument("make_imbalanced: fraction must lie in (0, 1)");
  std::vector<int> group0, group1;
  for (int i = 0; i < data.rows(); ++i)
    (data.sensitive(i) == 0 ? group0 : group1).push_back(i);
  if (group0.empty() || group1.empty())
    throw std::invalid_argument("make_imbalanced: needs both groups present");

  const double n1 = static_cast<double>(group1.size());
  int keep = static_cast<int>(std::llround(minority_fraction * n1 / (1.0 - minority_fraction)));
  keep = std::max(1, std::min<int>(keep, static_cast<int>(group0.size())));

  auto g = make_rng(seed, "imbalance");
  const std::vector<int> pick = sample_without_replacement(static_cast<int>(group0.size()), keep, g);
  std::vector<int> idx;
  idx.reserve(keep + group1.size());
  for (const int k : pick) idx.push_back(group0[k]);
  idx.insert(idx.end(), group1.begin(), group1.end());
  std::sort(idx.begin(), idx.end());
  return subset_rows(data, idx);
}

}  // namespace ftm

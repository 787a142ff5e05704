#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

namespace ftm {

struct Dataset {
  Eigen::MatrixXd features;   // n x d
  Eigen::VectorXi labels;     // {0,1}
  Eigen::VectorXi sensitive;  // {0,1}
  std::vector<std::string> feature_names;
  std::string provenance;

  int rows() const { return static_cast<int>(features.rows()); }
  int dim() const { return static_cast<int>(features.cols()); }
};

struct FeatureSpec {
  enum class Kind { continuous, categorical };
  std::string column;
  Kind kind = Kind::continuous;
};

// Declares how a CSV maps to a binary task: which column is the label and
// which raw values count as positive, same for the sensitive attribute, and
// the typed feature columns. Anything else in the file is ignored. The
// positive class is either one exact value, any value from a list, or a
// numeric threshold (value >= bound), whichever the schema sets.
struct DataSchema {
  std::string label_column, label_positive;
  std::string sensitive_column, sensitive_positive;
  std::vector<std::string> label_positive_any, sensitive_positive_any;
  std::optional<double> label_positive_at_least, sensitive_positive_at_least;
  char delimiter = ',';
  std::vector<FeatureSpec> features;
  std::vector<std::string> missing_tokens = {"", "?", "NA"};

  static DataSchema from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  static DataSchema load(const std::string& path);
};

struct RawTable {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
  long long dropped_missing = 0;
};

// RFC 4180 reader: quoted fields, doubled quotes, separators and newlines
// inside quotes, optional CRLF. Rows with a missing token in any used column
// are dropped (counted in dropped_missing); unparseable numeric cells are
// reported with row and column.
RawTable load_csv(const std::string& path, const DataSchema& schema);

// Seeded shuffle, then an exact floor(train_fraction * n) cut. Row order
// within each side stays ascending so downstream sampling is stable.
std::pair<RawTable, RawTable> split_raw(const RawTable& table, double train_fraction,
                                        std::uint64_t seed);

// Min-max scaling for continuous columns and one indicator per recorded
// category for categorical ones, fitted once (on training data) and applied
// unchanged elsewhere.
class Preprocessor {
 public:
  struct Range {
    double lo = 0.0, hi = 0.0;
  };

  static Preprocessor fit(const RawTable& table, const DataSchema& schema);
  Dataset transform(const RawTable& table) const;

  const std::map<std::string, Range>& ranges() const { return ranges_; }
  const std::map<std::string, std::vector<std::string>>& categories() const {
    return categories_;
  }

 private:
  DataSchema schema_;
  std::map<std::string, Range> ranges_;
  std::map<std::string, std::vector<std::string>> categories_;
};

std::pair<Dataset, Dataset> split_dataset(const Dataset& data, double train_fraction,
                                          std::uint64_t seed);

Dataset subset_rows(const Dataset& data, const std::vector<int>& idx);

// Downsample group 0 (without replacement) until its share of the result is
// minority_fraction, within one row. Group 1 is kept in full.
Dataset make_imbalanced(const Dataset& data, double minority_fraction, std::uint64_t seed);

}  // namespace ftm

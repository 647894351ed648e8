#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "crsvm/penalty_prox.hpp"

namespace crsvm {

/// Labelled design matrix. Rows are records, labels are exactly -1 or +1.
struct Dataset {
  Matrix X;
  Vector y;
  std::optional<GroupPartition> groups;
  std::vector<std::string> feature_names;

  std::size_t n() const { return static_cast<std::size_t>(X.rows()); }
  std::size_t p() const { return static_cast<std::size_t>(X.cols()); }

  /// Shape, label and finiteness checks. With for_training, also requires
  /// n >= 2 and both classes present.
  void validate(bool for_training = false) const;
};

/// One worker's block of rows. Xbar = diag(y) X is cached at construction.
class DataShard {
 public:
  DataShard(std::size_t id, Matrix X, Vector y, std::vector<std::size_t> rows);

  std::size_t id() const { return id_; }
  std::size_t n() const { return static_cast<std::size_t>(X_.rows()); }
  std::size_t p() const { return static_cast<std::size_t>(X_.cols()); }
  const Matrix& X() const { return X_; }
  const Vector& y() const { return y_; }
  const RowMatrix& Xbar() const { return Xbar_; }
  /// Row indices into the source dataset.
  const std::vector<std::size_t>& rows() const { return rows_; }

 private:
  std::size_t id_;
  Matrix X_;
  Vector y_;
  RowMatrix Xbar_;  // row-major: the worker streams it one row at a time
  std::vector<std::size_t> rows_;
};

/// Seeded permutation, then K contiguous blocks; the first n % K shards get
/// one extra row.
std::vector<DataShard> shard(const Dataset& data, std::size_t K,
                             std::uint64_t seed);

/// Two-class Gaussian design with signal on the first 10 coordinates.
struct SyntheticSpec {
  std::size_t n = 1000;
  std::size_t p = 50;
  double rho = 0.0;    // within-signal-block correlation
  double alpha = 0.0;  // fraction of rows replaced by label noise
  std::uint64_t seed = 0;

  void validate() const;
};

/// Number of leading coordinates carrying signal in the synthetic design.
inline constexpr std::size_t kSignalFeatures = 10;

Dataset generate_synthetic(const SyntheticSpec& spec);

/// sign(sum of the first 10 features), ties to +1.
Vector bayes_rule(const Matrix& X);

struct TableOptions {
  std::string label_col;      // empty: first column
  std::string pos_label = "1";
  std::string neg_label;      // empty: the single other token present
};

/// Header plus string cells of a delimited text file.
struct RawTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;
};

RawTable read_delimited(const std::string& path);

/// Every column parsed as a feature.
Matrix load_unlabeled(const std::string& path, std::vector<std::string>* names = nullptr);

/// Delimited text with a header row. Comma or tab, detected from the header.
Dataset load_table(const std::string& path, const TableOptions& opts = {});

/// Same, then applies a JSON group map and reorders columns so every group
/// is a contiguous block in map order.
Dataset load_grouped_table(const std::string& data_path,
                           const std::string& groupmap_path,
                           const TableOptions& opts = {});

/// Group map entries: {"name": ..., "prefix": "..."} or "prefixes": [...]
/// or "columns": [...]. Every column must land in exactly one group.
Dataset apply_group_map(const Dataset& data, const std::string& groupmap_json);

/// Writes label + features, comma separated, 17 significant digits.
void write_table(const std::string& path, const Dataset& data,
                 const std::string& label_name = "label");

/// Per-feature affine map x -> (x - mean) / scale.
struct Scaling {
  Vector mean;
  Vector scale;

  Matrix apply(const Matrix& X) const;
  Matrix invert(const Matrix& Z) const;
  bool empty() const { return mean.size() == 0; }
};

/// Centres each column and divides by its sample standard deviation;
/// zero-variance columns keep divisor 1.
std::pair<Dataset, Scaling> standardize(const Dataset& data);

}  // namespace crsvm

#include "crsvm/data_shard.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include <json.hpp>

#include "crsvm/error.hpp"

namespace crsvm {

void Dataset::validate(bool for_training) const {
  if (y.size() != X.rows())
    throw ShapeError("dataset has " + std::to_string(X.rows()) + " rows but " +
                     std::to_string(y.size()) + " labels");
  if (!feature_names.empty() && feature_names.size() != p())
    throw ShapeError("feature name count does not match column count");
  if (!X.allFinite()) throw InvalidArgument("dataset contains non-finite values");
  bool pos = false, neg = false;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (y[i] == 1.0)
      pos = true;
    else if (y[i] == -1.0)
      neg = true;
    else
      throw InvalidArgument("labels must be -1 or +1");
  }
  if (groups) groups->validate(p());
  if (for_training) {
    if (n() < 2) throw InvalidArgument("training needs at least two rows");
    if (!pos || !neg)
      throw InvalidArgument("training data must contain both classes");
  }
}

DataShard::DataShard(std::size_t id, Matrix X, Vector y,
                     std::vector<std::size_t> rows)
    : id_(id), X_(std::move(X)), y_(std::move(y)), rows_(std::move(rows)) {
  if (y_.size() != X_.rows() ||
      rows_.size() != static_cast<std::size_t>(X_.rows()))
    throw ShapeError("shard row counts disagree");
  Xbar_ = y_.asDiagonal() * X_;
}

std::vector<DataShard> shard(const Dataset& data, std::size_t K,
                             std::uint64_t seed) {
  const std::size_t n = data.n();
  if (K == 0) throw InvalidArgument("K must be at least 1");
  if (K > n)
    throw InvalidArgument("K = " + std::to_string(K) + " exceeds n = " +
                          std::to_string(n));
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);

  std::vector<DataShard> out;
  out.reserve(K);
  std::size_t pos = 0;
  const std::size_t base = n / K, extra = n % K;
  const auto p = static_cast<Eigen::Index>(data.p());
  for (std::size_t k = 0; k < K; ++k) {
    const std::size_t nk = base + (k < extra ? 1 : 0);
    Matrix X(static_cast<Eigen::Index>(nk), p);
    Vector y(static_cast<Eigen::Index>(nk));
    std::vector<std::size_t> rows(perm.begin() + static_cast<std::ptrdiff_t>(pos),
                                  perm.begin() + static_cast<std::ptrdiff_t>(pos + nk));
    for (std::size_t i = 0; i < nk; ++i) {
      const auto src = static_cast<Eigen::Index>(rows[i]);
      X.row(static_cast<Eigen::Index>(i)) = data.X.row(src);
      y[static_cast<Eigen::Index>(i)] = data.y[src];
    }
    out.emplace_back(k, std::move(X), std::move(y), std::move(rows));
    pos += nk;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic design
// ---------------------------------------------------------------------------

void SyntheticSpec::validate() const {
  if (p < kSignalFeatures)
    throw InvalidArgument("synthetic data needs p >= 10, got " +
                          std::to_string(p));
  if (n < 2) throw InvalidArgument("synthetic data needs n >= 2");
  if (!(rho >= 0.0 && rho < 1.0))
    throw InvalidArgument("rho must lie in [0, 1)");
  if (!(alpha >= 0.0 && alpha < 1.0))
    throw InvalidArgument("alpha must lie in [0, 1)");
}

namespace {

// One draw from N(shift * (1,..,1,0,..,0), Sigma) into row i.
void draw_row(Matrix& X, Eigen::Index i, double shift, double rho,
              std::mt19937_64& rng, std::normal_distribution<double>& z) {
  const auto p = X.cols();
  const auto s = static_cast<Eigen::Index>(kSignalFeatures);
  const double a = std::sqrt(1.0 - rho), b = std::sqrt(rho);
  const double w = z(rng);
  for (Eigen::Index j = 0; j < s; ++j) X(i, j) = shift + a * z(rng) + b * w;
  for (Eigen::Index j = s; j < p; ++j) X(i, j) = z(rng);
}

}  // namespace

Dataset generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  const auto n = static_cast<Eigen::Index>(spec.n);
  const auto p = static_cast<Eigen::Index>(spec.p);
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> z(0.0, 1.0);

  Dataset d;
  d.X.resize(n, p);
  d.y.resize(n);
  const Eigen::Index npos = n / 2;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double label = i < npos ? 1.0 : -1.0;
    d.y[i] = label;
    draw_row(d.X, i, label, spec.rho, rng, z);
  }

  const auto m = static_cast<std::size_t>(
      std::floor(spec.alpha * static_cast<double>(spec.n)));
  if (m > 0) {
    std::vector<std::size_t> idx(spec.n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::shuffle(idx.begin(), idx.end(), rng);
    std::bernoulli_distribution coin(0.5);
    for (std::size_t r = 0; r < m; ++r) {
      const auto i = static_cast<Eigen::Index>(idx[r]);
      draw_row(d.X, i, 0.0, spec.rho, rng, z);
      d.y[i] = coin(rng) ? 1.0 : -1.0;
    }
  }

  d.feature_names.reserve(spec.p);
  for (std::size_t j = 0; j < spec.p; ++j)
    d.feature_names.push_back("x" + std::to_string(j + 1));
  return d;
}

Vector bayes_rule(const Matrix& X) {
  if (X.cols() < static_cast<Eigen::Index>(kSignalFeatures))
    throw ShapeError("bayes_rule needs at least 10 columns");
  const Vector s =
      X.leftCols(static_cast<Eigen::Index>(kSignalFeatures)).rowwise().sum();
  Vector out(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i) out[i] = s[i] >= 0.0 ? 1.0 : -1.0;
  return out;
}

// ---------------------------------------------------------------------------
// Delimited text
// ---------------------------------------------------------------------------

namespace {

std::string trim(std::string s) {
  auto issp = [](unsigned char c) { return std::isspace(c) != 0; };
  while (!s.empty() && issp(static_cast<unsigned char>(s.back()))) s.pop_back();
  std::size_t b = 0;
  while (b < s.size() && issp(static_cast<unsigned char>(s[b]))) ++b;
  s.erase(0, b);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"')
    s = s.substr(1, s.size() - 2);
  return s;
}

std::vector<std::string> split(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(line);
  while (std::getline(ss, cur, delim)) out.push_back(trim(cur));
  if (!line.empty() && line.back() == delim) out.emplace_back();
  return out;
}

double parse_double(const std::string& s, std::size_t line, std::size_t col) {
  if (s.empty())
    throw ParseError("empty value at line " + std::to_string(line) +
                     ", column " + std::to_string(col + 1));
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || errno == ERANGE || !std::isfinite(v))
    throw ParseError("bad numeric value '" + s + "' at line " +
                     std::to_string(line) + ", column " +
                     std::to_string(col + 1));
  return v;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

RawTable read_delimited(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw ParseError("'" + path + "' is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const char delim = line.find('\t') != std::string::npos ? '\t' : ',';
  RawTable t;
  t.header = split(line, delim);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    auto cells = split(line, delim);
    if (cells.size() != t.header.size())
      throw ParseError("line " + std::to_string(lineno) + " has " +
                       std::to_string(cells.size()) + " fields, expected " +
                       std::to_string(t.header.size()));
    t.rows.push_back(std::move(cells));
    t.line_numbers.push_back(lineno);
  }
  return t;
}

Dataset load_table(const std::string& path, const TableOptions& opts) {
  const RawTable t = read_delimited(path);
  const auto& header = t.header;
  std::size_t label_idx = 0;
  if (!opts.label_col.empty()) {
    auto it = std::find(header.begin(), header.end(), opts.label_col);
    if (it == header.end())
      throw ParseError("label column '" + opts.label_col + "' not in header");
    label_idx = static_cast<std::size_t>(it - header.begin());
  }
  if (header.size() < 2) throw ParseError("need a label and at least one feature");
  if (t.rows.empty()) throw ParseError("'" + path + "' has no data rows");

  std::vector<std::string> names;
  for (std::size_t j = 0; j < header.size(); ++j)
    if (j != label_idx) names.push_back(header[j]);

  std::string neg = opts.neg_label;
  if (neg.empty()) {
    std::vector<std::string> others;
    for (const auto& row : t.rows) {
      const auto& l = row[label_idx];
      if (l != opts.pos_label && std::find(others.begin(), others.end(), l) == others.end())
        others.push_back(l);
    }
    if (others.size() > 1)
      throw ParseError("label token '" + others[1] +
                       "' is neither the positive nor the negative class");
    if (!others.empty()) neg = others.front();
  }

  Dataset d;
  const auto n = static_cast<Eigen::Index>(t.rows.size());
  const auto p = static_cast<Eigen::Index>(names.size());
  d.X.resize(n, p);
  d.y.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& row = t.rows[static_cast<std::size_t>(i)];
    const auto& l = row[label_idx];
    if (l == opts.pos_label)
      d.y[i] = 1.0;
    else if (l == neg)
      d.y[i] = -1.0;
    else
      throw ParseError("label token '" + l +
                       "' is neither the positive nor the negative class");
    Eigen::Index j = 0;
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c == label_idx) continue;
      d.X(i, j++) = parse_double(row[c], t.line_numbers[static_cast<std::size_t>(i)], c);
    }
  }
  d.feature_names = std::move(names);
  return d;
}

Matrix load_unlabeled(const std::string& path, std::vector<std::string>* names) {
  const RawTable t = read_delimited(path);
  Matrix X(static_cast<Eigen::Index>(t.rows.size()),
           static_cast<Eigen::Index>(t.header.size()));
  for (std::size_t i = 0; i < t.rows.size(); ++i)
    for (std::size_t j = 0; j < t.header.size(); ++j)
      X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          parse_double(t.rows[i][j], t.line_numbers[i], j);
  if (names) *names = t.header;
  return X;
}

Dataset apply_group_map(const Dataset& data, const std::string& groupmap_json) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(groupmap_json);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("group map: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("groups") || !doc["groups"].is_array() ||
      doc["groups"].empty())
    throw ParseError("group map needs a non-empty \"groups\" array");
  if (data.feature_names.size() != data.p())
    throw ConfigError("group map needs named feature columns");

  const auto& names = data.feature_names;
  std::map<std::string, std::size_t> col_of;
  for (std::size_t j = 0; j < names.size(); ++j) col_of.emplace(names[j], j);

  const std::size_t none = static_cast<std::size_t>(-1);
  std::vector<std::size_t> owner(names.size(), none);
  std::vector<std::string> group_names;
  const auto& groups = doc["groups"];

  auto assign = [&](std::size_t col, std::size_t g) {
    if (owner[col] != none && owner[col] != g)
      throw ConfigError("column '" + names[col] + "' assigned to both '" +
                        group_names[owner[col]] + "' and '" + group_names[g] +
                        "'");
    if (owner[col] == g)
      throw ConfigError("column '" + names[col] +
                        "' listed twice in group '" + group_names[g] + "'");
    owner[col] = g;
  };

  for (std::size_t g = 0; g < groups.size(); ++g) {
    const auto& entry = groups[g];
    if (!entry.is_object() || !entry.contains("name"))
      throw ParseError("group map entry " + std::to_string(g) + " has no name");
    group_names.push_back(entry["name"].get<std::string>());

    std::vector<std::string> prefixes;
    if (entry.contains("prefix"))
      prefixes.push_back(entry["prefix"].get<std::string>());
    if (entry.contains("prefixes"))
      for (const auto& s : entry["prefixes"]) prefixes.push_back(s.get<std::string>());
    const bool has_cols = entry.contains("columns");
    if (prefixes.empty() && !has_cols)
      throw ParseError("group '" + group_names[g] +
                       "' needs a prefix or a column list");

    if (has_cols) {
      for (const auto& c : entry["columns"]) {
        const auto name = c.get<std::string>();
        auto it = col_of.find(name);
        if (it == col_of.end())
          throw ConfigError("group '" + group_names[g] +
                            "' names unknown column '" + name + "'");
        assign(it->second, g);
      }
    }
    for (std::size_t j = 0; j < names.size(); ++j) {
      const bool hit = std::any_of(prefixes.begin(), prefixes.end(),
                                   [&](const std::string& pre) {
                                     return names[j].rfind(pre, 0) == 0;
                                   });
      if (hit) assign(j, g);
    }
  }

  for (std::size_t j = 0; j < names.size(); ++j)
    if (owner[j] == none)
      throw ConfigError("column '" + names[j] + "' is not in any group");

  std::vector<std::size_t> order;
  std::vector<std::size_t> sizes(group_names.size(), 0);
  for (std::size_t g = 0; g < group_names.size(); ++g)
    for (std::size_t j = 0; j < names.size(); ++j)
      if (owner[j] == g) {
        order.push_back(j);
        ++sizes[g];
      }
  for (std::size_t g = 0; g < sizes.size(); ++g)
    if (sizes[g] == 0)
      throw ConfigError("group '" + group_names[g] + "' matches no columns");

  Dataset out;
  out.y = data.y;
  out.X.resize(data.X.rows(), data.X.cols());
  for (std::size_t k = 0; k < order.size(); ++k) {
    out.X.col(static_cast<Eigen::Index>(k)) =
        data.X.col(static_cast<Eigen::Index>(order[k]));
    out.feature_names.push_back(names[order[k]]);
  }
  out.groups = GroupPartition::from_sizes(sizes, group_names);
  return out;
}

Dataset load_grouped_table(const std::string& data_path,
                           const std::string& groupmap_path,
                           const TableOptions& opts) {
  return apply_group_map(load_table(data_path, opts), read_file(groupmap_path));
}

void write_table(const std::string& path, const Dataset& data,
                 const std::string& label_name) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << label_name;
  for (std::size_t j = 0; j < data.p(); ++j)
    out << ',' << (j < data.feature_names.size() ? data.feature_names[j]
                                                 : "x" + std::to_string(j + 1));
  out << '\n' << std::setprecision(17);
  for (Eigen::Index i = 0; i < data.X.rows(); ++i) {
    out << (data.y[i] > 0 ? "1" : "-1");
    for (Eigen::Index j = 0; j < data.X.cols(); ++j) out << ',' << data.X(i, j);
    out << '\n';
  }
  if (!out) throw IoError("write to '" + path + "' failed");
}

// ---------------------------------------------------------------------------
// Standardization
// ---------------------------------------------------------------------------

Matrix Scaling::apply(const Matrix& X) const {
  if (X.cols() != mean.size())
    throw ShapeError("scaling expects " + std::to_string(mean.size()) +
                     " columns, got " + std::to_string(X.cols()));
  return (X.rowwise() - mean.transpose()).array().rowwise() /
         scale.transpose().array();
}

Matrix Scaling::invert(const Matrix& Z) const {
  if (Z.cols() != mean.size()) throw ShapeError("scaling column mismatch");
  Matrix X = Z.array().rowwise() * scale.transpose().array();
  return X.rowwise() + mean.transpose();
}

std::pair<Dataset, Scaling> standardize(const Dataset& data) {
  if (data.n() < 2) throw InvalidArgument("standardize needs n >= 2");
  Scaling s;
  s.mean = data.X.colwise().mean().transpose();
  s.scale.resize(data.X.cols());
  const double denom = static_cast<double>(data.n() - 1);
  for (Eigen::Index j = 0; j < data.X.cols(); ++j) {
    const double var =
        (data.X.col(j).array() - s.mean[j]).square().sum() / denom;
    const double sd = std::sqrt(var);
    s.scale[j] = sd > 1e-12 * std::max(1.0, std::abs(s.mean[j])) ? sd : 1.0;
  }
  Dataset out = data;
  out.X = s.apply(data.X);
  return {std::move(out), std::move(s)};
}

}  // namespace crsvm

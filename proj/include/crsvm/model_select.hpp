#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "crsvm/coordinator.hpp"
#include "crsvm/data_shard.hpp"

namespace crsvm {

/// log C(p, s) via lgamma.
double log_binomial(std::size_t p, std::size_t s);

/// C(p, s), saturating at the largest finite double.
double binomial_saturating(std::size_t p, std::size_t s);

/// slack + |S| ln n + 2 gamma C(p, |S|). The term is dropped when gamma = 0.
double svmic_value(double slack, std::size_t support, std::size_t n, std::size_t p,
                   double gamma);

/// Sum of hinge slacks [1 - y (x'beta + beta0)]_+ over the rows.
double hinge_slack(const Vector& beta, double beta0, const Matrix& X, const Vector& y);

double svmic(const FitResult& fit, const Dataset& data, double gamma);
double svmic(const FitResult& fit, const std::vector<DataShard>& shards, double gamma);

struct SvmicParams {
  double gamma = 0.5;
  std::vector<double> lambda1_grid;
  std::vector<double> lambda2_grid;
  std::vector<double> mu_grid{0.01, 0.1, 1.0};

  void validate() const;
};

struct GridCell {
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  double mu0 = 0.0;
  std::size_t lambda1_index = 0;  // index in the sorted, deduplicated grid
  std::size_t lambda2_index = 0;
  std::size_t mu_index = 0;
  bool ok = false;
  std::string error;
  double svmic = 0.0;
  std::size_t support = 0;
  std::size_t iterations = 0;
  double seconds = 0.0;
};

struct GridSearchResult {
  ModelConfig best_config;
  FitResult best_fit;
  std::size_t best_index = 0;
  std::vector<GridCell> cells;  // lambda1-major, then lambda2, then mu
};

/// True when a is preferred over b: smaller SVMIC, then smaller support, then
/// smaller lambda1, lambda2 and mu indices.
bool better_cell(const GridCell& a, const GridCell& b);

/// Fits every grid cell (in parallel when threads > 1) and returns the SVMIC
/// minimizer. Grids are sorted and deduplicated first, so the outcome does
/// not depend on the order in which values are listed.
GridSearchResult grid_search(const std::vector<DataShard>& shards,
                             const ModelConfig& base, const SvmicParams& params,
                             std::size_t threads = 0);

}  // namespace crsvm

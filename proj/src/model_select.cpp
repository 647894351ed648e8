#include "crsvm/model_select.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "crsvm/error.hpp"
#include "crsvm/worker_pool.hpp"

namespace crsvm {

double log_binomial(std::size_t p, std::size_t s) {
  if (s > p) throw InvalidArgument("binomial: k > n");
  const double n = static_cast<double>(p), k = static_cast<double>(s);
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

double binomial_saturating(std::size_t p, std::size_t s) {
  const double lb = log_binomial(p, s);
  constexpr double max = std::numeric_limits<double>::max();
  if (lb >= std::log(max)) return max;
  // lgamma differences leave a few ulps of noise; small values are integers.
  const double v = std::exp(lb);
  return v < 1e15 ? std::round(v) : v;
}

double svmic_value(double slack, std::size_t support, std::size_t n, std::size_t p,
                   double gamma) {
  if (n == 0) throw InvalidArgument("svmic: n must be positive");
  double v = slack + static_cast<double>(support) * std::log(static_cast<double>(n));
  if (gamma > 0.0) {
    const double c = binomial_saturating(p, support);
    const double term = 2.0 * gamma * c;
    v += std::isfinite(term) ? term : std::numeric_limits<double>::max();
  }
  return v;
}

double hinge_slack(const Vector& beta, double beta0, const Matrix& X, const Vector& y) {
  const Prediction pr = predict(beta, beta0, X);
  return (1.0 - (y.array() * pr.scores.array())).max(0.0).sum();
}

double svmic(const FitResult& fit, const Dataset& data, double gamma) {
  return svmic_value(hinge_slack(fit.beta, fit.beta0, data.X, data.y), fit.support.size(),
                     data.n(), data.p(), gamma);
}

double svmic(const FitResult& fit, const std::vector<DataShard>& shards, double gamma) {
  double slack = 0.0;
  std::size_t n = 0;
  for (const auto& s : shards) {
    slack += hinge_slack(fit.beta, fit.beta0, s.X(), s.y());
    n += s.n();
  }
  return svmic_value(slack, fit.support.size(), n,
                     static_cast<std::size_t>(fit.beta.size()), gamma);
}

void SvmicParams::validate() const {
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("gamma must lie in [0, 1]");
  if (lambda1_grid.empty() || lambda2_grid.empty() || mu_grid.empty())
    throw ConfigError("grids must be non-empty");
  for (double v : lambda1_grid)
    if (!(v >= 0.0)) throw ConfigError("lambda1 grid values must be non-negative");
  for (double v : lambda2_grid)
    if (!(v >= 0.0)) throw ConfigError("lambda2 grid values must be non-negative");
  for (double v : mu_grid)
    if (!(v > 0.0)) throw ConfigError("mu grid values must be positive");
}

bool better_cell(const GridCell& a, const GridCell& b) {
  if (a.ok != b.ok) return a.ok;
  if (a.svmic != b.svmic) return a.svmic < b.svmic;
  if (a.support != b.support) return a.support < b.support;
  if (a.lambda1_index != b.lambda1_index) return a.lambda1_index < b.lambda1_index;
  if (a.lambda2_index != b.lambda2_index) return a.lambda2_index < b.lambda2_index;
  return a.mu_index < b.mu_index;
}

namespace {

std::vector<double> sorted_unique(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

}  // namespace

GridSearchResult grid_search(const std::vector<DataShard>& shards,
                             const ModelConfig& base, const SvmicParams& params,
                             std::size_t threads) {
  params.validate();
  const auto l1 = sorted_unique(params.lambda1_grid);
  const auto l2 = sorted_unique(params.lambda2_grid);
  const auto mu = sorted_unique(params.mu_grid);

  std::vector<GridCell> cells;
  for (std::size_t i = 0; i < l1.size(); ++i)
    for (std::size_t j = 0; j < l2.size(); ++j)
      for (std::size_t m = 0; m < mu.size(); ++m) {
        GridCell c;
        c.lambda1 = l1[i];
        c.lambda2 = l2[j];
        c.mu0 = mu[m];
        c.lambda1_index = i;
        c.lambda2_index = j;
        c.mu_index = m;
        cells.push_back(c);
      }

  std::vector<std::optional<FitResult>> fits(cells.size());
  FitOptions inner;
  inner.threads = 1;
  WorkerPool pool(WorkerPool::default_threads(threads));
  pool.run(cells.size(), [&](std::size_t idx) {
    auto& c = cells[idx];
    ModelConfig cfg = base;
    cfg.lambda1 = c.lambda1;
    cfg.lambda2 = c.lambda2;
    cfg.mu0 = c.mu0;
    cfg.gamma = params.gamma;
    try {
      FitResult r = fit(shards, cfg, inner);
      c.svmic = svmic(r, shards, params.gamma);
      c.support = r.support.size();
      c.iterations = r.iterations;
      c.seconds = r.seconds;
      c.ok = true;
      fits[idx] = std::move(r);
    } catch (const Error& e) {
      c.error = e.kind() + ": " + e.what();
    }
  });

  std::size_t best = 0;
  for (std::size_t i = 1; i < cells.size(); ++i)
    if (better_cell(cells[i], cells[best])) best = i;
  if (!cells[best].ok) {
    std::string msg = "all " + std::to_string(cells.size()) + " grid fits failed:";
    for (const auto& c : cells) msg += " [" + c.error + "]";
    throw Error("grid_failed", msg);
  }

  GridSearchResult out;
  out.best_index = best;
  out.best_fit = std::move(*fits[best]);
  out.best_config = out.best_fit.config;
  out.cells = std::move(cells);
  return out;
}

}  // namespace crsvm

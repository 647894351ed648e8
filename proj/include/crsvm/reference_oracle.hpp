#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "crsvm/coordinator.hpp"
#include "crsvm/data_shard.hpp"
#include "crsvm/penalty_prox.hpp"

namespace crsvm {

/// Golden-section minimizer of f on [lo, hi], stopped at bracket width tol.
double golden_section(const std::function<double(double)>& f, double lo, double hi,
                      double tol = 1e-9);

/// argmin_xi L(xi) + (n_mu / 2)(xi - zeta)^2 by golden section, using
/// loss_value for L.
double prox_numeric(const LossKind& loss, double zeta, double n_mu);

/// Same, for an arbitrary convex scalar loss with slope bounded by max_slope
/// outside [-|zeta|, |zeta|].
double prox_numeric(const std::function<double(double)>& loss, double zeta,
                    double n_mu, double max_slope = 1.0);

struct DenseSolution {
  Vector beta;
  double beta0 = 0.0;
  double objective = 0.0;
  std::size_t iterations = 0;
};

/// Direct minimization of the full objective by proximal subgradient steps
/// with diminishing step sizes, keeping the best point visited. The l1 term
/// (and, for groups, the group term) is handled by its prox; everything
/// else by a subgradient. Convex configurations only.
DenseSolution dense_solve(const Matrix& X, const Vector& y, const ModelConfig& config,
                          std::size_t iterations = 100000);

/// Block matrices of the three-block splitting and the weight matrix H for
/// g = (xi_1..K, beta, beta0, b_1..K, d_1..K, e).
class HNormMonitor {
 public:
  /// shard_labels: y_k for each shard in worker order.
  HNormMonitor(const std::vector<Vector>& shard_labels, std::size_t p,
               StructureType structure, double mu, double nu);

  const Matrix& B() const { return B_; }
  const Matrix& C() const { return C_; }
  const Matrix& H() const { return H_; }
  std::size_t dimension() const { return static_cast<std::size_t>(H_.rows()); }

  double norm(const Vector& v) const;

 private:
  Matrix B_, C_, H_;
};

/// ||g^{t+1} - g^t||_H for consecutive snapshots.
std::vector<double> hnorm_monitor(const std::vector<Vector>& snapshots,
                                  const HNormMonitor& monitor);

/// ||g^t - target||_H for every snapshot.
std::vector<double> hnorm_distance(const std::vector<Vector>& snapshots,
                                   const Vector& target, const HNormMonitor& monitor);

/// Largest eigenvalue of K I + F'F by power iteration.
double max_eigen_structure(std::size_t K, std::size_t p, double tol = 1e-10,
                           std::size_t max_iter = 2000000);

}  // namespace crsvm

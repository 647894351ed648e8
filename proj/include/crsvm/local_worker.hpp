#pragma once

#include <cstddef>
#include <optional>

#include <Eigen/Cholesky>

#include "crsvm/data_shard.hpp"
#include "crsvm/penalty_prox.hpp"

namespace crsvm {

enum class SolveStrategyType { Auto, DirectInverse, Woodbury, ConjugateGradient };

struct SolveStrategy {
  SolveStrategyType type = SolveStrategyType::Auto;
  double cg_tol = 1e-10;       // relative residual
  std::size_t cg_max_iter = 0; // 0: 10 * p

  void validate() const;
};

/// Resolves Auto from the shard shape: direct when p <= n_k and p <= 2000,
/// Woodbury when n_k < p and n_k <= 2000, CG otherwise.
SolveStrategyType resolve_strategy(SolveStrategyType requested, std::size_t n_k,
                                   std::size_t p);

std::string to_string(SolveStrategyType t);

/// Solves (Xbar' Xbar + I) x = rhs. The factorization is built once.
class BetaSolver {
 public:
  BetaSolver(const RowMatrix& Xbar, SolveStrategy strategy);

  SolveStrategyType type() const { return type_; }

  /// warm is used only by CG.
  Vector solve(const Vector& rhs, const Vector* warm = nullptr) const;

  /// CG iterations used by the last solve.
  std::size_t last_iterations() const { return last_iters_; }

  /// Xbar' Xbar x, from the stored Gram matrix when the direct strategy
  /// holds one, otherwise as Xbar' xbar_x (xbar_x = Xbar x).
  bool has_gram() const { return type_ == SolveStrategyType::DirectInverse; }
  Vector gram_times(const Vector& x, const Vector& xbar_x) const;

 private:
  const RowMatrix& Xbar_;
  SolveStrategyType type_;
  Matrix gram_;  // Xbar' Xbar, direct strategy only
  double tol_;
  std::size_t max_iter_;
  Eigen::LLT<Matrix> llt_;
  mutable std::size_t last_iters_ = 0;
};

/// Worker to coordinator, one per worker per round.
struct UpstreamMessage {
  std::size_t worker_id = 0;
  double c = 0.0;
  Vector beta_k;
  Vector d_k;
};

/// Coordinator to workers.
struct DownstreamMessage {
  Vector beta_tilde;
  double beta0_tilde = 0.0;
  Vector beta;
  double beta0 = 0.0;
  double mu = 1.0;
};

/// Per-worker contributions to the stopping rule, reduced in worker order.
struct ResidualPiece {
  double primal_xi_sq = 0.0;   // ||xi - 1 + Xbar beta_k + y beta0||^2
  double primal_cons_sq = 0.0; // ||beta_k - beta||^2
  double cons_inf = 0.0;       // ||beta_k - beta||_inf
  double dual_sq = 0.0;        // ||Xbar'(dxi + y dbeta0) - dbeta||^2, unscaled
  double ax_sq = 0.0;          // ||Xbar beta_k||^2 + ||beta_k||^2
  double bv_sq = 0.0;          // ||xi + y beta0||^2
  double aty_sq = 0.0;         // ||Xbar' b + d||^2
};

/// One simulated local machine and its iterates.
class LocalWorker {
 public:
  LocalWorker(const DataShard& shard, std::size_t n_global,
              SolveStrategy strategy = {});

  const DataShard& shard() const { return shard_; }
  std::size_t id() const { return shard_.id(); }
  SolveStrategyType strategy() const { return solver_.type(); }

  // Reordered duals, using the lagged tilde values from the previous round.
  // mu is the penalty that round ran with.
  void update_duals(double mu);

  // beta_k from the cached factorization; also refreshes Xbar beta_k.
  const Vector& solve_beta_k(double mu);

  // xi proposal from the current beta_k, beta0 and b.
  const Vector& propose_xi(double mu, const LossKind& loss);

  double compute_ck(double mu) const;

  // update_duals (with the previous round's penalty), solve_beta_k,
  // propose_xi, compute_ck. The Xbar beta_k product and the proposal share
  // one pass over the rows.
  UpstreamMessage propose(double mu, const LossKind& loss);

  // Back-substitution on xi; stores the broadcast values for the next round.
  void correct(const DownstreamMessage& msg, double nu);

  // Requires correct() to have run this round.
  ResidualPiece residuals() const;

  // Number of Xbar * beta_k products formed so far.
  std::size_t xbar_products() const { return xbar_products_; }

  // Recomputes the cached Xbar' products from the state vectors. Needed only
  // after editing xi, b, xi_tilde or beta_k directly.
  void sync();

  // State, exposed for tests and monitors.
  Vector beta_k, xi, b, d;
  Vector xi_tilde;          // last proposal
  Vector beta_tilde_prev;   // broadcast beta tilde, previous round
  double beta0_tilde_prev = 0.0;
  Vector beta;              // broadcast beta^t
  double beta0 = 0.0;
  Vector xbar_beta;         // Xbar beta_k for the current beta_k

 private:
  const DataShard& shard_;
  std::size_t n_global_;
  BetaSolver solver_;
  std::size_t xbar_products_ = 0;
  double mu_last_ = 0.0;  // 0 before the first round
  std::size_t rounds_ = 0;

  void solve_only(double mu);
  void fused_proposal(double mu, const LossKind& loss);

  // Xbar' applied to fixed vectors, and running Xbar' products of the
  // iterates. The running ones follow the same linear recursions as xi and b
  // and are recomputed exactly every kRefresh rounds.
  static constexpr std::size_t kRefresh = 64;
  Vector xt_one_, xt_y_;
  Vector xt_xi_, xt_b_, xt_xi_tilde_, gram_beta_k_, xt_dxi_;

  // Change of (xi, beta0, beta) over the last correction, for the dual residual.
  Vector dxi_;
  double dbeta0_ = 0.0;
  Vector dbeta_;
};

}  // namespace crsvm

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "crsvm/data_shard.hpp"
#include "crsvm/local_worker.hpp"
#include "crsvm/penalty_prox.hpp"

namespace crsvm {

/// Direction of the residual-balancing step. AsWritten doubles mu when the
/// dual residual dominates; Balance doubles it when the primal residual does.
enum class MuRule { Balance, AsWritten };

std::string to_string(MuRule r);
MuRule parse_mu_rule(const std::string& s);

struct ModelConfig {
  LossKind loss;
  SparsePenaltyKind sparse;
  StructurePenaltyKind structure;
  double lambda1 = 0.1;
  double lambda2 = 0.1;
  double mu0 = 0.01;
  double nu = 0.9;          // back-substitution factor, open interval (0, 1)
  std::size_t K = 1;
  std::size_t max_iter = 5000;  // per phase
  double eps_abs = 1e-4;
  double eps_rel = 1e-3;
  bool adaptive_mu = true;
  std::size_t mu_freeze_iter = 100;
  MuRule mu_rule = MuRule::Balance;
  double gamma = 0.5;       // SVMIC combinatorial weight
  std::uint64_t seed = 0;
  SolveStrategy strategy;

  void validate(std::size_t p) const;
};

/// Coordinator iterates.
struct GlobalState {
  Vector beta;
  double beta0 = 0.0;
  Vector theta;
  Vector e;
  double mu = 1.0;
  double mu_prev = 1.0;  // penalty of the previous round, used by the e step
  std::size_t t = 0;
  Vector beta_tilde_prev;
  double beta0_tilde_prev = 0.0;
};

GlobalState init_global_state(std::size_t p, const StructureMatrix& G, double mu0);

struct FitOptions {
  std::size_t threads = 0;       // 0: min(K, hardware threads)
  bool record_trace = false;     // per-iteration beta-step thresholds
  bool record_snapshots = false; // per-iteration g vectors for the H-norm monitor
};

/// One beta-step, as seen by the threshold instrumentation.
struct IterationTrace {
  std::size_t iteration = 0;
  int phase = 1;       // 1: l1 warm start, 2: reweighted
  Vector beta_t;       // consensus beta entering the step
  Vector weights;      // w_j
  Vector thresholds;   // threshold actually applied to coordinate j
};

struct FitResult {
  Vector beta;
  double beta0 = 0.0;
  std::vector<std::size_t> support;
  std::vector<double> group_norms;
  std::optional<GroupPartition> groups;
  std::size_t iterations = 0;
  std::size_t phase_switch_iteration = 0;  // 0 when no reweighted phase ran
  bool converged = false;
  double seconds = 0.0;
  std::vector<double> primal_trace;
  std::vector<double> dual_trace;
  std::vector<double> mu_trace;
  double final_mu = 0.0;
  double objective = 0.0;
  ModelConfig config;

  // Final consensus gaps and local copies.
  double consensus_gap = 0.0;  // max_k ||beta_k - beta||_inf
  double theta_gap = 0.0;      // ||theta - G beta||_inf
  std::vector<Vector> beta_k;
  Vector theta;

  std::vector<IterationTrace> trace;
  std::vector<Vector> snapshots;
  std::vector<double> snapshot_mu;
};

/// e <- e - mu_prev (theta - G beta_tilde_prev), then
/// theta <- prox(G beta + e/mu).
void update_theta_e(GlobalState& s, const StructurePenaltyKind& kind,
                    const StructureMatrix& G, double lambda2);

/// w_j: lambda1 in the l1 phase, P'(|beta_j|) in the reweighted phase.
Vector lla_weights(const SparsePenaltyKind& kind, const Vector& beta,
                   double lambda1, bool reweighted);

struct BetaStep {
  Vector beta_tilde;
  Vector beta_next;
  Vector thresholds;
};

/// Consensus beta step from the worker messages (averaged in worker-id order)
/// followed by the relaxation beta_next = (1 - nu) beta + nu beta_tilde.
BetaStep update_beta(const GlobalState& s, const std::vector<UpstreamMessage>& msgs,
                     const Vector& weights, const StructureMatrix& G, double nu);

/// Returns (beta0_tilde, beta0_next). Requires exactly one message per worker
/// id in [0, K).
std::pair<double, double> update_beta0(double beta0,
                                       const std::vector<UpstreamMessage>& msgs,
                                       std::size_t K, double nu);
std::pair<double, double> update_beta0(double beta0, const std::vector<double>& c,
                                       double nu);

/// AsWritten: x2 when 10 primal < dual, /2 when primal > 10 dual.
/// Balance swaps the two conditions. Fixed once iteration >= freeze or
/// adaptation is off.
double adapt_mu(double mu, double primal, double dual, std::size_t iteration,
                bool adaptive = true, std::size_t freeze = 100,
                MuRule rule = MuRule::AsWritten);

/// Coordinator-side pieces of the residuals.
struct CoordinatorResidual {
  double theta_gap_sq = 0.0;  // ||theta - G beta||^2
  double theta_gap_inf = 0.0;
  double g_dbeta_sq = 0.0;    // ||G (beta_next - beta)||^2
  double theta_sq = 0.0;
  double beta_sq = 0.0;       // ||beta||^2
  double gbeta_sq = 0.0;
  double e_sq = 0.0;
};

struct ConvergenceCheck {
  double primal = 0.0;
  double dual = 0.0;
  double eps_primal = 0.0;
  double eps_dual = 0.0;
  double consensus_inf = 0.0;
  double theta_inf = 0.0;
  bool converged = false;
};

/// Stacked residuals over the three constraint blocks, with the usual
/// absolute/relative tolerances plus an infinity-norm gate of 10 eps_abs on
/// both consensus gaps.
ConvergenceCheck check_convergence(const std::vector<ResidualPiece>& pieces,
                                   const CoordinatorResidual& coord,
                                   std::size_t n, std::size_t p, std::size_t pG,
                                   double mu, double eps_abs, double eps_rel);

struct Prediction {
  Vector scores;
  Vector labels;
};

/// score = X beta + beta0, label = sign(score) with ties to +1.
Prediction predict(const Vector& beta, double beta0, const Matrix& X);
Prediction predict(const FitResult& fit, const Matrix& X);

/// (1/n) sum L(1 - y (x'beta + beta0)) + sum P(|beta_j|) + structure penalty.
double objective(const Matrix& X, const Vector& y, const Vector& beta, double beta0,
                 const ModelConfig& config);
double objective(const std::vector<DataShard>& shards, const Vector& beta,
                 double beta0, const ModelConfig& config);

/// Full training loop over the given shards (config.K must equal their count).
FitResult fit(const std::vector<DataShard>& shards, const ModelConfig& config,
              const FitOptions& options = {});

/// Support and group norms for a coefficient vector.
void fill_summary(FitResult& r);

}  // namespace crsvm

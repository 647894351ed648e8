#include "crsvm/coordinator.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "crsvm/error.hpp"
#include "crsvm/worker_pool.hpp"

namespace crsvm {

void ModelConfig::validate(std::size_t p) const {
  loss.validate();
  sparse.validate();
  structure.validate(p);
  if (!(lambda1 >= 0.0)) throw ConfigError("lambda1 must be non-negative");
  if (!(lambda2 >= 0.0)) throw ConfigError("lambda2 must be non-negative");
  if (!(mu0 > 0.0)) throw ConfigError("mu0 must be positive");
  if (!(nu > 0.0 && nu < 1.0))
    throw ConfigError("nu must lie strictly inside (0, 1), got " + std::to_string(nu));
  if (K < 1) throw ConfigError("K must be at least 1");
  if (max_iter < 1) throw ConfigError("max_iter must be at least 1");
  if (!(eps_abs > 0.0)) throw ConfigError("eps_abs must be positive");
  if (!(eps_rel >= 0.0)) throw ConfigError("eps_rel must be non-negative");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("gamma must lie in [0, 1]");
  strategy.validate();
}

GlobalState init_global_state(std::size_t p, const StructureMatrix& G, double mu0) {
  GlobalState s;
  const auto pp = static_cast<Eigen::Index>(p);
  const auto pg = static_cast<Eigen::Index>(G.rows());
  s.beta = Vector::Zero(pp);
  s.theta = Vector::Zero(pg);
  s.e = Vector::Zero(pg);
  s.mu = mu0;
  s.mu_prev = mu0;
  s.beta_tilde_prev = Vector::Zero(pp);
  return s;
}

void update_theta_e(GlobalState& s, const StructurePenaltyKind& kind,
                    const StructureMatrix& G, double lambda2) {
  s.e -= s.mu_prev * (s.theta - G.apply(s.beta_tilde_prev));
  s.theta = theta_update(kind, G.apply(s.beta) + s.e / s.mu, lambda2, s.mu);
}

Vector lla_weights(const SparsePenaltyKind& kind, const Vector& beta,
                   double lambda1, bool reweighted) {
  if (!reweighted || kind.type == SparseType::L1)
    return Vector::Constant(beta.size(), lambda1);
  Vector w(beta.size());
  for (Eigen::Index j = 0; j < beta.size(); ++j)
    w[j] = penalty_weight(kind, std::abs(beta[j]), lambda1);
  return w;
}

namespace {

std::vector<const UpstreamMessage*> ordered(const std::vector<UpstreamMessage>& msgs,
                                            std::size_t K) {
  std::vector<const UpstreamMessage*> out(K, nullptr);
  for (const auto& m : msgs) {
    if (m.worker_id >= K)
      throw ProtocolError("message from unknown worker " + std::to_string(m.worker_id));
    if (out[m.worker_id])
      throw ProtocolError("duplicate message from worker " + std::to_string(m.worker_id));
    out[m.worker_id] = &m;
  }
  for (std::size_t k = 0; k < K; ++k)
    if (!out[k]) throw ProtocolError("missing message from worker " + std::to_string(k));
  return out;
}

}  // namespace

BetaStep update_beta(const GlobalState& s, const std::vector<UpstreamMessage>& msgs,
                     const Vector& weights, const StructureMatrix& G, double nu) {
  const std::size_t K = msgs.size();
  if (K == 0) throw ProtocolError("no worker messages");
  const auto order = ordered(msgs, K);
  const auto p = s.beta.size();
  if (weights.size() != p) throw ShapeError("weight vector length mismatch");

  Vector sum_beta = Vector::Zero(p), sum_d = Vector::Zero(p);
  for (const auto* m : order) {
    if (m->beta_k.size() != p || m->d_k.size() != p)
      throw ProtocolError("worker message has wrong dimension");
    sum_beta += m->beta_k;
    sum_d += m->d_k;
  }
  const double Kd = static_cast<double>(K);
  const double mu = s.mu;
  // K (beta_bar - d_bar / mu)
  const Vector local = sum_beta - sum_d / mu;

  BetaStep out;
  if (G.is_identity()) {
    const Vector center = (local + s.theta - s.e / mu) / (Kd + 1.0);
    out.thresholds = weights / (mu * (Kd + 1.0));
    out.beta_tilde = soft_threshold(center, out.thresholds);
  } else {
    const double eta = eta_for(K);
    const Vector grad =
        G.apply_normal(s.beta, Kd) - local - G.apply_transpose(s.theta - s.e / mu);
    out.thresholds = weights / (mu * eta);
    out.beta_tilde = soft_threshold(s.beta - grad / eta, out.thresholds);
  }
  out.beta_next = (1.0 - nu) * s.beta + nu * out.beta_tilde;
  return out;
}

std::pair<double, double> update_beta0(double beta0, const std::vector<double>& c,
                                       double nu) {
  double tilde = 0.0;
  for (double v : c) tilde += v;
  return {tilde, (1.0 - nu) * beta0 + nu * tilde};
}

std::pair<double, double> update_beta0(double beta0,
                                       const std::vector<UpstreamMessage>& msgs,
                                       std::size_t K, double nu) {
  const auto order = ordered(msgs, K);
  std::vector<double> c;
  c.reserve(K);
  for (const auto* m : order) c.push_back(m->c);
  return update_beta0(beta0, c, nu);
}

std::string to_string(MuRule r) {
  return r == MuRule::Balance ? "balance" : "as_written";
}

MuRule parse_mu_rule(const std::string& s) {
  if (s == "balance") return MuRule::Balance;
  if (s == "as_written") return MuRule::AsWritten;
  throw ConfigError("unknown mu rule '" + s + "'");
}

double adapt_mu(double mu, double primal, double dual, std::size_t iteration,
                bool adaptive, std::size_t freeze, MuRule rule) {
  if (!adaptive || iteration >= freeze) return mu;
  if (rule == MuRule::Balance) std::swap(primal, dual);
  if (10.0 * primal < dual) return mu * 2.0;
  if (primal > 10.0 * dual) return mu / 2.0;
  return mu;
}

ConvergenceCheck check_convergence(const std::vector<ResidualPiece>& pieces,
                                   const CoordinatorResidual& coord, std::size_t n,
                                   std::size_t p, std::size_t pG, double mu,
                                   double eps_abs, double eps_rel) {
  double primal_sq = coord.theta_gap_sq, dual_sq = coord.g_dbeta_sq;
  double ax_sq = coord.theta_sq, bv_sq = 0.0, aty_sq = coord.e_sq;
  double cons_inf = 0.0;
  for (const auto& r : pieces) {
    primal_sq += r.primal_xi_sq + r.primal_cons_sq;
    dual_sq += r.dual_sq;
    ax_sq += r.ax_sq;
    bv_sq += r.bv_sq + coord.beta_sq;
    aty_sq += r.aty_sq;
    cons_inf = std::max(cons_inf, r.cons_inf);
  }
  bv_sq += coord.gbeta_sq;
  const double K = static_cast<double>(pieces.size());
  const double m_primal = static_cast<double>(n) + K * static_cast<double>(p) +
                          static_cast<double>(pG);
  const double m_dual = K * static_cast<double>(p) + static_cast<double>(pG);

  ConvergenceCheck c;
  c.primal = std::sqrt(primal_sq);
  c.dual = mu * std::sqrt(dual_sq);
  c.eps_primal = std::sqrt(m_primal) * eps_abs +
                 eps_rel * std::max({std::sqrt(ax_sq), std::sqrt(bv_sq),
                                     std::sqrt(static_cast<double>(n))});
  c.eps_dual = std::sqrt(m_dual) * eps_abs + eps_rel * std::sqrt(aty_sq);
  c.consensus_inf = cons_inf;
  c.theta_inf = coord.theta_gap_inf;
  c.converged = c.primal <= c.eps_primal && c.dual <= c.eps_dual &&
                cons_inf <= 10.0 * eps_abs && c.theta_inf <= 10.0 * eps_abs;
  return c;
}

Prediction predict(const Vector& beta, double beta0, const Matrix& X) {
  if (X.cols() != beta.size())
    throw ShapeError("predict: expected " + std::to_string(beta.size()) +
                     " columns, got " + std::to_string(X.cols()));
  Prediction out;
  out.scores = (X * beta).array() + beta0;
  out.labels.resize(out.scores.size());
  for (Eigen::Index i = 0; i < out.scores.size(); ++i)
    out.labels[i] = out.scores[i] >= 0.0 ? 1.0 : -1.0;
  return out;
}

Prediction predict(const FitResult& fit, const Matrix& X) {
  return predict(fit.beta, fit.beta0, X);
}

namespace {

double penalty_terms(const Vector& beta, const ModelConfig& config) {
  double total = 0.0;
  for (Eigen::Index j = 0; j < beta.size(); ++j)
    total += penalty_value(config.sparse, std::abs(beta[j]), config.lambda1);
  const double l2 = config.lambda2;
  switch (config.structure.type) {
    case StructureType::Ridge:
      total += l2 * beta.squaredNorm();
      break;
    case StructureType::Fusion:
      for (Eigen::Index j = 0; j + 1 < beta.size(); ++j)
        total += l2 * std::abs(beta[j] - beta[j + 1]);
      break;
    case StructureType::Group:
      for (const auto& b : config.structure.groups.blocks())
        total += l2 * beta.segment(static_cast<Eigen::Index>(b.start),
                                   static_cast<Eigen::Index>(b.size))
                          .norm();
      break;
  }
  return total;
}

}  // namespace

double objective(const Matrix& X, const Vector& y, const Vector& beta, double beta0,
                 const ModelConfig& config) {
  if (X.cols() != beta.size() || X.rows() != y.size())
    throw ShapeError("objective: dimension mismatch");
  const Vector margin = y.cwiseProduct((X * beta).array().matrix() +
                                       Vector::Constant(y.size(), beta0));
  double loss = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i)
    loss += loss_value(config.loss, 1.0 - margin[i]);
  return loss / static_cast<double>(y.size()) + penalty_terms(beta, config);
}

double objective(const std::vector<DataShard>& shards, const Vector& beta,
                 double beta0, const ModelConfig& config) {
  double loss = 0.0;
  std::size_t n = 0;
  for (const auto& s : shards) {
    const Vector r = 1.0 - (s.Xbar() * beta + beta0 * s.y()).array();
    for (Eigen::Index i = 0; i < r.size(); ++i) loss += loss_value(config.loss, r[i]);
    n += s.n();
  }
  if (n == 0) throw InvalidArgument("objective: no rows");
  return loss / static_cast<double>(n) + penalty_terms(beta, config);
}

void fill_summary(FitResult& r) {
  r.support.clear();
  for (Eigen::Index j = 0; j < r.beta.size(); ++j)
    if (r.beta[j] != 0.0) r.support.push_back(static_cast<std::size_t>(j));
  r.group_norms.clear();
  if (r.groups)
    for (const auto& b : r.groups->blocks())
      r.group_norms.push_back(r.beta
                                  .segment(static_cast<Eigen::Index>(b.start),
                                           static_cast<Eigen::Index>(b.size))
                                  .norm());
}

namespace {

Vector snapshot(const std::vector<LocalWorker>& workers, const GlobalState& s) {
  Eigen::Index len = s.beta.size() + 1 + s.e.size();
  for (const auto& w : workers) len += 2 * w.xi.size() + w.d.size();
  Vector g(len);
  Eigen::Index at = 0;
  auto put = [&](const Vector& v) {
    g.segment(at, v.size()) = v;
    at += v.size();
  };
  for (const auto& w : workers) put(w.xi);
  put(s.beta);
  g[at++] = s.beta0;
  for (const auto& w : workers) put(w.b);
  for (const auto& w : workers) put(w.d);
  put(s.e);
  return g;
}

}  // namespace

FitResult fit(const std::vector<DataShard>& shards, const ModelConfig& config,
              const FitOptions& options) {
  if (shards.empty()) throw InvalidArgument("fit: no shards");
  const std::size_t K = shards.size();
  const std::size_t p = shards.front().p();
  if (config.K != K)
    throw ConfigError("config K = " + std::to_string(config.K) + " but " +
                      std::to_string(K) + " shards given");
  config.validate(p);

  std::size_t n = 0;
  bool pos = false, neg = false;
  for (std::size_t k = 0; k < K; ++k) {
    const auto& s = shards[k];
    if (s.p() != p) throw ShapeError("shards disagree on feature count");
    if (s.id() != k) throw InvalidArgument("shard ids must be 0..K-1 in order");
    if (!s.X().allFinite()) throw InvalidArgument("shard contains non-finite values");
    n += s.n();
    for (Eigen::Index i = 0; i < s.y().size(); ++i) {
      if (s.y()[i] == 1.0) pos = true;
      else if (s.y()[i] == -1.0) neg = true;
      else throw InvalidArgument("labels must be -1 or +1");
    }
  }
  if (!pos || !neg) throw InvalidArgument("training data must contain both classes");

  const auto start = std::chrono::steady_clock::now();
  const StructureMatrix G(config.structure.type, p);
  const std::size_t pG = G.rows();

  std::vector<LocalWorker> workers;
  workers.reserve(K);
  for (const auto& s : shards) workers.emplace_back(s, n, config.strategy);

  WorkerPool pool(WorkerPool::default_threads(options.threads ? options.threads : K));
  GlobalState st = init_global_state(p, G, config.mu0);

  FitResult res;
  res.config = config;
  if (config.structure.type == StructureType::Group) res.groups = config.structure.groups;

  const bool two_phase = !config.sparse.is_convex();
  bool reweighted = false;
  std::size_t phase_iter = 0;
  std::vector<UpstreamMessage> msgs(K);
  std::vector<ResidualPiece> pieces(K);
  ConvergenceCheck last;

  for (std::size_t it = 0;; ++it) {
    const double mu = st.mu;

    pool.run(K, [&](std::size_t k) { msgs[k] = workers[k].propose(mu, config.loss); });

    update_theta_e(st, config.structure, G, config.lambda2);
    if (options.record_snapshots) {
      res.snapshots.push_back(snapshot(workers, st));
      res.snapshot_mu.push_back(mu);
    }

    const Vector w = lla_weights(config.sparse, st.beta, config.lambda1, reweighted);
    BetaStep bs = update_beta(st, msgs, w, G, config.nu);
    const auto [b0_tilde, b0_next] = update_beta0(st.beta0, msgs, K, config.nu);

    if (options.record_trace)
      res.trace.push_back({it, reweighted ? 2 : 1, st.beta, w, bs.thresholds});

    if (!bs.beta_next.allFinite() || !std::isfinite(b0_next))
      throw DivergenceError("non-finite iterate at iteration " + std::to_string(it), it);

    const DownstreamMessage down{bs.beta_tilde, b0_tilde, bs.beta_next, b0_next, mu};
    pool.run(K, [&](std::size_t k) {
      workers[k].correct(down, config.nu);
      pieces[k] = workers[k].residuals();
    });

    CoordinatorResidual cr;
    const Vector gbeta = G.apply(bs.beta_next);
    const Vector gap = st.theta - gbeta;
    cr.theta_gap_sq = gap.squaredNorm();
    cr.theta_gap_inf = gap.size() ? gap.cwiseAbs().maxCoeff() : 0.0;
    cr.g_dbeta_sq = G.apply(bs.beta_next - st.beta).squaredNorm();
    cr.theta_sq = st.theta.squaredNorm();
    cr.beta_sq = bs.beta_next.squaredNorm();
    cr.gbeta_sq = gbeta.squaredNorm();
    cr.e_sq = st.e.squaredNorm();

    st.beta = std::move(bs.beta_next);
    st.beta0 = b0_next;
    st.beta_tilde_prev = std::move(bs.beta_tilde);
    st.beta0_tilde_prev = b0_tilde;
    st.t = it + 1;

    last = check_convergence(pieces, cr, n, p, pG, mu, config.eps_abs, config.eps_rel);
    res.primal_trace.push_back(last.primal);
    res.dual_trace.push_back(last.dual);
    res.mu_trace.push_back(mu);
    ++phase_iter;

    const bool phase_done = last.converged || phase_iter >= config.max_iter;
    if (phase_done) {
      if (two_phase && !reweighted) {
        reweighted = true;
        res.phase_switch_iteration = it + 1;
        phase_iter = 0;
      } else {
        res.converged = last.converged;
        res.iterations = it + 1;
        break;
      }
    }
    st.mu_prev = mu;
    st.mu = adapt_mu(mu, last.primal, last.dual, it, config.adaptive_mu,
                     config.mu_freeze_iter, config.mu_rule);
  }

  res.beta = st.beta;
  res.beta0 = st.beta0;
  res.theta = st.theta;
  res.final_mu = st.mu;
  res.consensus_gap = last.consensus_inf;
  res.theta_gap = last.theta_inf;
  for (const auto& w : workers) res.beta_k.push_back(w.beta_k);
  res.objective = objective(shards, res.beta, res.beta0, config);
  fill_summary(res);
  res.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return res;
}

}  // namespace crsvm

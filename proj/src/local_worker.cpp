#include "crsvm/local_worker.hpp"

#include <cmath>

#include "crsvm/error.hpp"

namespace crsvm {

void SolveStrategy::validate() const {
  if (!(cg_tol > 0.0)) throw InvalidArgument("CG tolerance must be positive");
}

SolveStrategyType resolve_strategy(SolveStrategyType requested, std::size_t n_k,
                                   std::size_t p) {
  if (requested != SolveStrategyType::Auto) return requested;
  if (p <= n_k && p <= 2000) return SolveStrategyType::DirectInverse;
  if (n_k < p && n_k <= 2000) return SolveStrategyType::Woodbury;
  return SolveStrategyType::ConjugateGradient;
}

std::string to_string(SolveStrategyType t) {
  switch (t) {
    case SolveStrategyType::Auto: return "auto";
    case SolveStrategyType::DirectInverse: return "direct";
    case SolveStrategyType::Woodbury: return "woodbury";
    case SolveStrategyType::ConjugateGradient: return "cg";
  }
  return "?";
}

BetaSolver::BetaSolver(const RowMatrix& Xbar, SolveStrategy strategy)
    : Xbar_(Xbar),
      type_(resolve_strategy(strategy.type, static_cast<std::size_t>(Xbar.rows()),
                             static_cast<std::size_t>(Xbar.cols()))),
      tol_(strategy.cg_tol),
      max_iter_(strategy.cg_max_iter) {
  strategy.validate();
  const auto p = Xbar.cols();
  const auto n = Xbar.rows();
  if (max_iter_ == 0) max_iter_ = 10 * static_cast<std::size_t>(std::max<Eigen::Index>(p, 1));
  if (type_ == SolveStrategyType::DirectInverse) {
    gram_ = Xbar.transpose() * Xbar;
    llt_.compute(gram_ + Matrix::Identity(p, p));
  } else if (type_ == SolveStrategyType::Woodbury) {
    Matrix A = Matrix::Identity(n, n);
    A.selfadjointView<Eigen::Lower>().rankUpdate(Xbar);
    llt_.compute(A);
  }
  if (type_ != SolveStrategyType::ConjugateGradient && llt_.info() != Eigen::Success)
    throw SolverFailure("Cholesky factorization failed", 0.0);
}

Vector BetaSolver::solve(const Vector& rhs, const Vector* warm) const {
  if (rhs.size() != Xbar_.cols()) throw ShapeError("BetaSolver: rhs length mismatch");
  switch (type_) {
    case SolveStrategyType::DirectInverse:
      return llt_.solve(rhs);
    case SolveStrategyType::Woodbury: {
      // (I + X'X)^{-1} = I - X'(I + XX')^{-1} X
      const Vector t = llt_.solve(Xbar_ * rhs);
      return rhs - Xbar_.transpose() * t;
    }
    case SolveStrategyType::ConjugateGradient: {
      auto op = [&](const Vector& v) -> Vector {
        return v + Xbar_.transpose() * (Xbar_ * v);
      };
      Vector x = (warm && warm->size() == rhs.size()) ? *warm
                                                      : Vector::Zero(rhs.size());
      const double bnorm = rhs.norm();
      if (bnorm == 0.0) {
        last_iters_ = 0;
        return Vector::Zero(rhs.size());
      }
      Vector r = rhs - op(x);
      Vector p = r;
      double rs = r.squaredNorm();
      const double target = tol_ * bnorm;
      std::size_t it = 0;
      while (std::sqrt(rs) > target) {
        if (it == max_iter_)
          throw SolverFailure("conjugate gradient did not converge in " +
                                  std::to_string(max_iter_) + " iterations",
                              std::sqrt(rs));
        const Vector Ap = op(p);
        const double alpha = rs / p.dot(Ap);
        x += alpha * p;
        r -= alpha * Ap;
        const double rs_new = r.squaredNorm();
        p = r + (rs_new / rs) * p;
        rs = rs_new;
        ++it;
      }
      last_iters_ = it;
      return x;
    }
    case SolveStrategyType::Auto:
      break;
  }
  throw InvalidArgument("BetaSolver: unresolved strategy");
}

Vector BetaSolver::gram_times(const Vector& x, const Vector& xbar_x) const {
  if (type_ == SolveStrategyType::DirectInverse) return gram_ * x;
  return Xbar_.transpose() * xbar_x;
}

LocalWorker::LocalWorker(const DataShard& shard, std::size_t n_global,
                         SolveStrategy strategy)
    : shard_(shard), n_global_(n_global), solver_(shard.Xbar(), strategy) {
  if (n_global < shard.n())
    throw InvalidArgument("global row count smaller than shard");
  const auto n = static_cast<Eigen::Index>(shard.n());
  const auto p = static_cast<Eigen::Index>(shard.p());
  beta_k = Vector::Zero(p);
  xi = Vector::Zero(n);
  b = Vector::Zero(n);
  d = Vector::Zero(p);
  xi_tilde = Vector::Zero(n);
  beta_tilde_prev = Vector::Zero(p);
  beta = Vector::Zero(p);
  xbar_beta = Vector::Zero(n);
  dxi_ = Vector::Zero(n);
  dbeta_ = Vector::Zero(p);
  const auto& Xb = shard.Xbar();
  xt_one_ = Xb.transpose() * Vector::Ones(n);
  xt_y_ = Xb.transpose() * shard.y();
  xt_xi_ = Vector::Zero(p);
  xt_b_ = Vector::Zero(p);
  xt_xi_tilde_ = Vector::Zero(p);
  gram_beta_k_ = Vector::Zero(p);
  xt_dxi_ = Vector::Zero(p);
}

void LocalWorker::sync() {
  const auto& Xb = shard_.Xbar();
  xt_xi_ = Xb.transpose() * xi;
  xt_b_ = Xb.transpose() * b;
  xt_xi_tilde_ = Xb.transpose() * xi_tilde;
  gram_beta_k_ = Xb.transpose() * xbar_beta;
}

void LocalWorker::update_duals(double mu) {
  const auto& y = shard_.y();
  b -= mu * (xi_tilde.array() - 1.0 + xbar_beta.array() + y.array() * beta0_tilde_prev)
                .matrix();
  xt_b_ -= mu * (xt_xi_tilde_ - xt_one_ + gram_beta_k_ + beta0_tilde_prev * xt_y_);
  d -= mu * (beta_k - beta_tilde_prev);
}

void LocalWorker::solve_only(double mu) {
  // Xbar'(1 - xi - y beta0 + b/mu) from the cached products
  const Vector rhs = xt_one_ - xt_xi_ - beta0 * xt_y_ + xt_b_ / mu + beta + d / mu;
  beta_k = solver_.solve(rhs, &beta_k);
}

const Vector& LocalWorker::solve_beta_k(double mu) {
  solve_only(mu);
  xbar_beta = shard_.Xbar() * beta_k;
  gram_beta_k_ = solver_.gram_times(beta_k, xbar_beta);
  ++xbar_products_;
  return beta_k;
}

const Vector& LocalWorker::propose_xi(double mu, const LossKind& loss) {
  const auto& y = shard_.y();
  const double n_mu = static_cast<double>(n_global_) * mu;
  for (Eigen::Index i = 0; i < xi.size(); ++i) {
    const double zeta = 1.0 - xbar_beta[i] - y[i] * beta0 + b[i] / mu;
    xi_tilde[i] = prox_loss(loss, zeta, n_mu);
  }
  xt_xi_tilde_ = shard_.Xbar().transpose() * xi_tilde;
  return xi_tilde;
}

void LocalWorker::fused_proposal(double mu, const LossKind& loss) {
  const auto& Xb = shard_.Xbar();
  const auto& y = shard_.y();
  const double n_mu = static_cast<double>(n_global_) * mu;
  const bool gram = solver_.has_gram();
  xt_xi_tilde_.setZero();
  if (!gram) gram_beta_k_.setZero();
  for (Eigen::Index i = 0; i < xi.size(); ++i) {
    const auto row = Xb.row(i);
    const double s = row.dot(beta_k);
    xbar_beta[i] = s;
    xi_tilde[i] = prox_loss(loss, 1.0 - s - y[i] * beta0 + b[i] / mu, n_mu);
    xt_xi_tilde_.noalias() += xi_tilde[i] * row.transpose();
    if (!gram) gram_beta_k_.noalias() += s * row.transpose();
  }
  if (gram) gram_beta_k_ = solver_.gram_times(beta_k, xbar_beta);
  ++xbar_products_;
}

double LocalWorker::compute_ck(double mu) const {
  const auto& y = shard_.y();
  const double s =
      y.dot((1.0 - xi_tilde.array() - xbar_beta.array() + b.array() / mu).matrix());
  return s / static_cast<double>(n_global_);
}

UpstreamMessage LocalWorker::propose(double mu, const LossKind& loss) {
  update_duals(mu_last_ > 0.0 ? mu_last_ : mu);
  mu_last_ = mu;
  if (++rounds_ % kRefresh == 0) {
    const auto& Xb = shard_.Xbar();
    xt_xi_ = Xb.transpose() * xi;
    xt_b_ = Xb.transpose() * b;
  }
  solve_only(mu);
  fused_proposal(mu, loss);
  return UpstreamMessage{id(), compute_ck(mu), beta_k, d};
}

void LocalWorker::correct(const DownstreamMessage& msg, double nu) {
  if (msg.beta.size() != beta.size() || msg.beta_tilde.size() != beta.size())
    throw ProtocolError("downstream message has wrong dimension");
  const auto& y = shard_.y();
  const double shift = nu * (beta0 - msg.beta0_tilde);
  Vector next = (1.0 - nu) * xi + nu * xi_tilde + shift * y;
  dxi_ = next - xi;
  xi = std::move(next);
  Vector xt_next = (1.0 - nu) * xt_xi_ + nu * xt_xi_tilde_ + shift * xt_y_;
  xt_dxi_ = xt_next - xt_xi_;
  xt_xi_ = std::move(xt_next);
  dbeta0_ = msg.beta0 - beta0;
  dbeta_ = msg.beta - beta;
  beta = msg.beta;
  beta0 = msg.beta0;
  beta_tilde_prev = msg.beta_tilde;
  beta0_tilde_prev = msg.beta0_tilde;
}

ResidualPiece LocalWorker::residuals() const {
  const auto& y = shard_.y();
  ResidualPiece r;
  r.primal_xi_sq =
      (xi.array() - 1.0 + xbar_beta.array() + y.array() * beta0).matrix().squaredNorm();
  const Vector cons = beta_k - beta;
  r.primal_cons_sq = cons.squaredNorm();
  r.cons_inf = cons.size() ? cons.cwiseAbs().maxCoeff() : 0.0;

  r.dual_sq = (xt_dxi_ + dbeta0_ * xt_y_ - dbeta_).squaredNorm();
  r.aty_sq = (xt_b_ + d).squaredNorm();
  r.ax_sq = xbar_beta.squaredNorm() + beta_k.squaredNorm();
  r.bv_sq = (xi + beta0 * y).squaredNorm();
  return r;
}

}  // namespace crsvm

#include "crsvm/reference_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Eigenvalues>

#include "crsvm/error.hpp"

namespace crsvm {

double golden_section(const std::function<double(double)>& f, double lo, double hi,
                      double tol) {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - inv_phi * (b - a), d = a + inv_phi * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > tol) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

double prox_numeric(const std::function<double(double)>& loss, double zeta,
                    double n_mu, double max_slope) {
  if (!(n_mu > 0.0)) throw InvalidArgument("prox_numeric: n*mu must be positive");
  // The minimizer lies between zeta and the loss minimizer set, and within
  // max_slope / n_mu of zeta when the slope is bounded.
  const double r = max_slope / n_mu + std::abs(zeta) + 1.0;
  auto f = [&](double x) { return loss(x) + 0.5 * n_mu * (x - zeta) * (x - zeta); };
  return golden_section(f, zeta - r, zeta + r);
}

double prox_numeric(const LossKind& loss, double zeta, double n_mu) {
  loss.validate();
  return prox_numeric([&](double x) { return loss_value(loss, x); }, zeta, n_mu, 1.0);
}

// ---------------------------------------------------------------------------
// Dense reference solver
// ---------------------------------------------------------------------------

namespace {

double loss_slope(const LossKind& k, double r) {
  switch (k.type) {
    case LossType::Hinge: return r > 0.0 ? 1.0 : 0.0;
    case LossType::LeastSquares: return 2.0 * r;
    case LossType::SquareHinge: return r > 0.0 ? r : 0.0;
    case LossType::HuberizedHinge:
      if (r <= 0.0) return 0.0;
      return r <= k.delta ? r / k.delta : 1.0;
    case LossType::Pinball: return r >= 0.0 ? 1.0 : -k.tau;
    case LossType::HuberizedPinball:
      if (r > k.delta) return 1.0;
      if (r >= 0.0) return r / k.delta;
      if (r >= -k.delta) return k.tau * r / k.delta;
      return -k.tau;
  }
  return 0.0;
}

double loss_curvature(const LossKind& k) {
  switch (k.type) {
    case LossType::LeastSquares: return 2.0;
    case LossType::HuberizedHinge:
    case LossType::HuberizedPinball: return 1.0 / k.delta;
    default: return 1.0;
  }
}

}  // namespace

DenseSolution dense_solve(const Matrix& X, const Vector& y, const ModelConfig& config,
                          std::size_t iterations) {
  if (!config.sparse.is_convex())
    throw UnsupportedError("dense_solve handles convex penalties only");
  const auto n = X.rows(), p = X.cols();
  if (y.size() != n) throw ShapeError("dense_solve: label count mismatch");
  config.loss.validate();
  config.structure.validate(static_cast<std::size_t>(p));

  const Matrix Xbar = y.asDiagonal() * X;
  const double nd = static_cast<double>(n);
  const double l1 = config.lambda1, l2 = config.lambda2;
  const auto st = config.structure.type;

  // Step scale from the curvature of the smooth parts.
  Matrix Xa(n, p + 1);
  Xa << X, Vector::Ones(n);
  const double xnorm =
      Eigen::SelfAdjointEigenSolver<Matrix>(Xa.transpose() * Xa / nd, Eigen::EigenvaluesOnly)
          .eigenvalues()
          .maxCoeff();
  double L = loss_curvature(config.loss) * xnorm;
  if (st == StructureType::Ridge) L += 2.0 * l2;
  if (st == StructureType::Fusion) L += 4.0 * l2;
  const double a0 = 1.0 / std::max(L, 1e-8);

  auto prox = [&](const Vector& v, double a) -> Vector {
    Vector out = soft_threshold(v, a * l1);
    if (st == StructureType::Group)
      for (const auto& b : config.structure.groups.blocks()) {
        const auto s = static_cast<Eigen::Index>(b.start);
        const auto m = static_cast<Eigen::Index>(b.size);
        out.segment(s, m) = group_soft_threshold(out.segment(s, m), a * l2);
      }
    return out;
  };

  DenseSolution best;
  best.beta = Vector::Zero(p);
  best.beta0 = 0.0;
  best.objective = objective(X, y, best.beta, best.beta0, config);

  Vector beta = Vector::Zero(p);
  double beta0 = 0.0;
  Vector slope(n);
  for (std::size_t t = 0; t < iterations; ++t) {
    const Vector r = (1.0 - (Xbar * beta + beta0 * y).array()).matrix();
    for (Eigen::Index i = 0; i < n; ++i) slope[i] = loss_slope(config.loss, r[i]);
    // d/dbeta of (1/n) sum L(r_i) with dr_i/dbeta = -Xbar_i
    Vector g = -(Xbar.transpose() * slope) / nd;
    const double g0 = -y.dot(slope) / nd;
    if (st == StructureType::Ridge) g += 2.0 * l2 * beta;
    if (st == StructureType::Fusion)
      for (Eigen::Index j = 0; j + 1 < p; ++j) {
        const double diff = beta[j] - beta[j + 1];
        const double s = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
        g[j] += l2 * s;
        g[j + 1] -= l2 * s;
      }
    const double a = a0 / std::sqrt(static_cast<double>(t) + 1.0);
    beta = prox(beta - a * g, a);
    beta0 -= a * g0;

    const double f = objective(X, y, beta, beta0, config);
    if (f < best.objective) {
      best.objective = f;
      best.beta = beta;
      best.beta0 = beta0;
    }
  }
  best.iterations = iterations;
  return best;
}

// ---------------------------------------------------------------------------
// H-norm monitor
// ---------------------------------------------------------------------------

HNormMonitor::HNormMonitor(const std::vector<Vector>& shard_labels, std::size_t p,
                           StructureType structure, double mu, double nu) {
  if (!(mu > 0.0)) throw InvalidArgument("HNormMonitor: mu must be positive");
  if (!(nu > 0.0 && nu < 1.0)) throw InvalidArgument("HNormMonitor: nu must lie in (0, 1)");
  const auto K = static_cast<Eigen::Index>(shard_labels.size());
  Eigen::Index n = 0;
  for (const auto& y : shard_labels) n += y.size();
  const auto pp = static_cast<Eigen::Index>(p);
  const Matrix G = StructureMatrix(structure, p).dense();
  const auto pg = G.rows();
  const Eigen::Index m = n + K * pp + pg;

  B_ = Matrix::Zero(m, n);
  B_.topRows(n).setIdentity();

  C_ = Matrix::Zero(m, pp + 1);
  Eigen::Index row = 0;
  for (const auto& y : shard_labels) {
    C_.block(row, pp, y.size(), 1) = y;
    row += y.size();
  }
  for (Eigen::Index k = 0; k < K; ++k) {
    C_.block(row, 0, pp, pp) = -Matrix::Identity(pp, pp);
    row += pp;
  }
  C_.block(row, 0, pg, pp) = -G;

  const Matrix BtB = B_.transpose() * B_;
  const Matrix BtC = B_.transpose() * C_;
  const Matrix corr = BtC.transpose() * BtB.llt().solve(BtC);
  const Eigen::Index d2 = n, d3 = pp + 1;
  H_ = Matrix::Zero(d2 + d3 + m, d2 + d3 + m);
  const double s = mu / nu;
  H_.block(0, 0, d2, d2) = s * BtB;
  H_.block(0, d2, d2, d3) = s * BtC;
  H_.block(d2, 0, d3, d2) = s * BtC.transpose();
  H_.block(d2, d2, d3, d3) = s * (C_.transpose() * C_ + corr);
  H_.block(d2 + d3, d2 + d3, m, m) = Matrix::Identity(m, m) / mu;
}

double HNormMonitor::norm(const Vector& v) const {
  if (v.size() != H_.rows())
    throw ShapeError("HNormMonitor: vector length " + std::to_string(v.size()) +
                     ", expected " + std::to_string(H_.rows()));
  return std::sqrt(std::max(0.0, v.dot(H_ * v)));
}

std::vector<double> hnorm_monitor(const std::vector<Vector>& snapshots,
                                  const HNormMonitor& monitor) {
  std::vector<double> out;
  for (std::size_t t = 0; t + 1 < snapshots.size(); ++t) {
    if (snapshots[t].size() != snapshots[t + 1].size())
      throw ShapeError("hnorm_monitor: snapshot lengths differ");
    out.push_back(monitor.norm(snapshots[t + 1] - snapshots[t]));
  }
  return out;
}

std::vector<double> hnorm_distance(const std::vector<Vector>& snapshots,
                                   const Vector& target, const HNormMonitor& monitor) {
  std::vector<double> out;
  out.reserve(snapshots.size());
  for (const auto& g : snapshots) out.push_back(monitor.norm(g - target));
  return out;
}

// ---------------------------------------------------------------------------
// Eigenvalue of K I + F'F
// ---------------------------------------------------------------------------

double max_eigen_structure(std::size_t K, std::size_t p, double tol,
                           std::size_t max_iter) {
  if (p < 2) throw InvalidArgument("max_eigen_structure needs p >= 2");
  const StructureMatrix F(StructureType::Fusion, p);
  // Iterate on F'F alone (its spectrum is [0, 4)) and add K at the end; the
  // shift improves the eigenvalue ratio. The alternating start vector is
  // close to the oscillating top eigenvector.
  Vector v(static_cast<Eigen::Index>(p));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = (i % 2 == 0) ? 1.0 : -1.0;
  v.normalize();
  double rho = 0.0;
  for (std::size_t it = 0; it < max_iter; ++it) {
    Vector w = F.apply_transpose(F.apply(v));
    const double next = v.dot(w);
    const double wn = w.norm();
    if (wn == 0.0) return static_cast<double>(K);
    v = w / wn;
    const double lam_prev = static_cast<double>(K) + rho;
    const double lam = static_cast<double>(K) + next;
    if (it > 0 && std::abs(lam - lam_prev) <= tol * std::abs(lam)) {
      rho = next;
      break;
    }
    rho = next;
  }
  return static_cast<double>(K) + rho;
}

}  // namespace crsvm

#include "crsvm/penalty_prox.hpp"

#include <algorithm>
#include <cmath>

#include "crsvm/error.hpp"

namespace crsvm {

// ---------------------------------------------------------------------------
// Kinds
// ---------------------------------------------------------------------------

void LossKind::validate() const {
  if (uses_tau() && !(tau > 0.0 && tau <= 1.0))
    throw InvalidArgument("tau must lie in (0, 1], got " + std::to_string(tau));
  if (uses_delta() && !(delta > 0.0))
    throw InvalidArgument("delta must be positive, got " +
                          std::to_string(delta));
}

bool LossKind::uses_tau() const {
  return type == LossType::Pinball || type == LossType::HuberizedPinball;
}

bool LossKind::uses_delta() const {
  return type == LossType::HuberizedHinge ||
         type == LossType::HuberizedPinball;
}

void SparsePenaltyKind::validate() const {
  if (type == SparseType::SCAD && !(a > 2.0))
    throw InvalidArgument("SCAD requires a > 2, got " + std::to_string(a));
  if (type == SparseType::MCP && !(a > 0.0))
    throw InvalidArgument("MCP requires a > 0, got " + std::to_string(a));
}

GroupPartition::GroupPartition(std::vector<Block> blocks,
                               std::vector<std::string> names)
    : blocks_(std::move(blocks)), names_(std::move(names)) {
  if (!names_.empty() && names_.size() != blocks_.size())
    throw InvalidArgument("group names do not match group count");
}

GroupPartition GroupPartition::from_sizes(const std::vector<std::size_t>& sizes,
                                          std::vector<std::string> names) {
  std::vector<Block> blocks;
  blocks.reserve(sizes.size());
  std::size_t start = 0;
  for (std::size_t s : sizes) {
    blocks.push_back({start, s});
    start += s;
  }
  return GroupPartition(std::move(blocks), std::move(names));
}

std::size_t GroupPartition::dimension() const {
  std::size_t d = 0;
  for (const auto& b : blocks_) d += b.size;
  return d;
}

std::vector<std::size_t> GroupPartition::sizes() const {
  std::vector<std::size_t> out;
  out.reserve(blocks_.size());
  for (const auto& b : blocks_) out.push_back(b.size);
  return out;
}

void GroupPartition::validate(std::size_t p) const {
  if (blocks_.empty()) throw InvalidArgument("group partition is empty");
  std::size_t expected = 0;
  for (const auto& b : blocks_) {
    if (b.size == 0) throw InvalidArgument("group partition has an empty block");
    if (b.start != expected)
      throw InvalidArgument("group blocks must be contiguous and ordered");
    expected += b.size;
  }
  if (expected != p)
    throw ShapeError("group partition covers " + std::to_string(expected) +
                     " coefficients, expected " + std::to_string(p));
}

void StructurePenaltyKind::validate(std::size_t p) const {
  if (type == StructureType::Fusion && p < 2)
    throw InvalidArgument("fusion penalty needs p >= 2");
  if (type == StructureType::Group) groups.validate(p);
}

std::string to_string(LossType t) {
  switch (t) {
    case LossType::Hinge: return "hinge";
    case LossType::LeastSquares: return "ls";
    case LossType::SquareHinge: return "sqhinge";
    case LossType::HuberizedHinge: return "hhinge";
    case LossType::Pinball: return "pinball";
    case LossType::HuberizedPinball: return "hpinball";
  }
  return "?";
}

std::string to_string(SparseType t) {
  switch (t) {
    case SparseType::L1: return "l1";
    case SparseType::SCAD: return "scad";
    case SparseType::MCP: return "mcp";
  }
  return "?";
}

std::string to_string(StructureType t) {
  switch (t) {
    case StructureType::Ridge: return "en";
    case StructureType::Fusion: return "sfl";
    case StructureType::Group: return "sgl";
  }
  return "?";
}

LossType parse_loss_type(std::string_view s) {
  if (s == "hinge") return LossType::Hinge;
  if (s == "ls") return LossType::LeastSquares;
  if (s == "sqhinge") return LossType::SquareHinge;
  if (s == "hhinge") return LossType::HuberizedHinge;
  if (s == "pinball") return LossType::Pinball;
  if (s == "hpinball") return LossType::HuberizedPinball;
  throw InvalidArgument("unknown loss '" + std::string(s) + "'");
}

SparseType parse_sparse_type(std::string_view s) {
  if (s == "l1") return SparseType::L1;
  if (s == "scad") return SparseType::SCAD;
  if (s == "mcp") return SparseType::MCP;
  throw InvalidArgument("unknown sparse penalty '" + std::string(s) + "'");
}

StructureType parse_structure_type(std::string_view s) {
  if (s == "en") return StructureType::Ridge;
  if (s == "sfl") return StructureType::Fusion;
  if (s == "sgl") return StructureType::Group;
  throw InvalidArgument("unknown structure penalty '" + std::string(s) + "'");
}

// ---------------------------------------------------------------------------
// Kernels
// ---------------------------------------------------------------------------

double soft_threshold(double v, double kappa) {
  if (kappa < 0.0) throw InvalidArgument("soft_threshold: negative kappa");
  const double m = std::abs(v) - kappa;
  if (m <= 0.0) return 0.0;
  return v > 0.0 ? m : -m;
}

Vector soft_threshold(const Vector& v, double kappa) {
  if (kappa < 0.0) throw InvalidArgument("soft_threshold: negative kappa");
  Vector out(v.size());
  for (Eigen::Index j = 0; j < v.size(); ++j) {
    const double m = std::abs(v[j]) - kappa;
    out[j] = m <= 0.0 ? 0.0 : (v[j] > 0.0 ? m : -m);
  }
  return out;
}

Vector soft_threshold(const Vector& v, const Vector& kappa) {
  if (kappa.size() != v.size())
    throw ShapeError("soft_threshold: threshold vector length mismatch");
  Vector out(v.size());
  for (Eigen::Index j = 0; j < v.size(); ++j) out[j] = soft_threshold(v[j], kappa[j]);
  return out;
}

Vector group_soft_threshold(const Vector& x, double kappa) {
  if (kappa < 0.0)
    throw InvalidArgument("group_soft_threshold: negative kappa");
  const double norm = x.norm();
  if (norm <= kappa || norm == 0.0) return Vector::Zero(x.size());
  return x * ((norm - kappa) / norm);
}

Vector theta_update(const StructurePenaltyKind& kind, const Vector& u,
                    double lambda2, double mu) {
  if (!(mu > 0.0)) throw InvalidArgument("theta_update: mu must be positive");
  if (lambda2 < 0.0)
    throw InvalidArgument("theta_update: lambda2 must be non-negative");
  switch (kind.type) {
    case StructureType::Ridge:
      return u * (mu / (2.0 * lambda2 + mu));
    case StructureType::Fusion:
      return soft_threshold(u, lambda2 / mu);
    case StructureType::Group: {
      const auto& g = kind.groups;
      if (g.dimension() != static_cast<std::size_t>(u.size()))
        throw ShapeError("theta_update: input length " +
                         std::to_string(u.size()) +
                         " does not match group partition dimension " +
                         std::to_string(g.dimension()));
      Vector out(u.size());
      const double kappa = lambda2 / mu;
      for (const auto& b : g.blocks()) {
        const auto n = static_cast<Eigen::Index>(b.size);
        const auto s = static_cast<Eigen::Index>(b.start);
        out.segment(s, n) = group_soft_threshold(u.segment(s, n), kappa);
      }
      return out;
    }
  }
  throw InvalidArgument("theta_update: unknown structure kind");
}

double prox_loss(const LossKind& kind, double zeta, double n_mu) {
  if (!(n_mu > 0.0)) throw InvalidArgument("prox_loss: n*mu must be positive");
  const double s = n_mu;
  switch (kind.type) {
    case LossType::Hinge:
      return std::max(zeta - 1.0 / s, std::min(0.0, zeta));
    case LossType::LeastSquares:
      return s * zeta / (s + 2.0);
    case LossType::SquareHinge:
      return zeta >= 0.0 ? s * zeta / (s + 1.0) : zeta;
    case LossType::HuberizedHinge: {
      const double sd = s * kind.delta;
      return std::max(zeta - 1.0 / s, std::min(zeta, sd * zeta / (1.0 + sd)));
    }
    case LossType::Pinball:
      return std::max(zeta - 1.0 / s, std::min(0.0, zeta + kind.tau / s));
    case LossType::HuberizedPinball: {
      const double d = kind.delta;
      const double tau = kind.tau;
      const double sd = s * d;
      if (zeta > d + 1.0 / s) return zeta - 1.0 / s;
      if (zeta >= 0.0) return sd * zeta / (sd + 1.0);
      if (zeta >= -d - tau / s) return sd * zeta / (sd + tau);
      return zeta + tau / s;
    }
  }
  throw InvalidArgument("prox_loss: unknown loss kind");
}

double loss_value(const LossKind& kind, double r) {
  switch (kind.type) {
    case LossType::Hinge:
      return std::max(r, 0.0);
    case LossType::LeastSquares:
      return r * r;
    case LossType::SquareHinge:
      return r > 0.0 ? 0.5 * r * r : 0.0;
    case LossType::HuberizedHinge: {
      const double d = kind.delta;
      if (r <= 0.0) return 0.0;
      if (r <= d) return r * r / (2.0 * d);
      return r - d / 2.0;
    }
    case LossType::Pinball:
      return r >= 0.0 ? r : -kind.tau * r;
    case LossType::HuberizedPinball: {
      const double d = kind.delta;
      const double tau = kind.tau;
      if (r > d) return r - d / 2.0;
      if (r >= 0.0) return r * r / (2.0 * d);
      if (r >= -d) return tau * r * r / (2.0 * d);
      return -tau * (r + d / 2.0);
    }
  }
  throw InvalidArgument("loss_value: unknown loss kind");
}

double penalty_weight(const SparsePenaltyKind& kind, double abs_beta,
                      double lambda1) {
  const double b = std::abs(abs_beta);
  switch (kind.type) {
    case SparseType::L1:
      return lambda1;
    case SparseType::SCAD:
      if (b <= lambda1) return lambda1;
      if (b < kind.a * lambda1) return (kind.a * lambda1 - b) / (kind.a - 1.0);
      return 0.0;
    case SparseType::MCP:
      if (b <= kind.a * lambda1) return lambda1 - b / kind.a;
      return 0.0;
  }
  return lambda1;
}

double penalty_value(const SparsePenaltyKind& kind, double abs_beta,
                     double lambda1) {
  const double b = std::abs(abs_beta);
  const double a = kind.a;
  switch (kind.type) {
    case SparseType::L1:
      return lambda1 * b;
    case SparseType::SCAD:
      if (b <= lambda1) return lambda1 * b;
      if (b <= a * lambda1)
        return (-b * b + 2.0 * a * lambda1 * b - lambda1 * lambda1) /
               (2.0 * (a - 1.0));
      return (a + 1.0) * lambda1 * lambda1 / 2.0;
    case SparseType::MCP:
      if (b <= a * lambda1) return lambda1 * b - b * b / (2.0 * a);
      return a * lambda1 * lambda1 / 2.0;
  }
  return lambda1 * b;
}

// ---------------------------------------------------------------------------
// Structure matrix
// ---------------------------------------------------------------------------

StructureMatrix::StructureMatrix(StructureType type, std::size_t p)
    : type_(type), p_(p) {
  if (type_ == StructureType::Fusion && p_ < 2)
    throw InvalidArgument("fusion structure matrix needs p >= 2");
}

std::size_t StructureMatrix::rows() const {
  return type_ == StructureType::Fusion ? p_ - 1 : p_;
}

Vector StructureMatrix::apply(const Vector& x) const {
  if (static_cast<std::size_t>(x.size()) != p_)
    throw ShapeError("StructureMatrix::apply: length mismatch");
  if (is_identity()) return x;
  const auto m = static_cast<Eigen::Index>(p_ - 1);
  return x.head(m) - x.tail(m);
}

Vector StructureMatrix::apply_transpose(const Vector& y) const {
  if (static_cast<std::size_t>(y.size()) != rows())
    throw ShapeError("StructureMatrix::apply_transpose: length mismatch");
  if (is_identity()) return y;
  const auto m = static_cast<Eigen::Index>(p_ - 1);
  Vector out = Vector::Zero(static_cast<Eigen::Index>(p_));
  out.head(m) += y;
  out.tail(m) -= y;
  return out;
}

Vector StructureMatrix::apply_normal(const Vector& x, double K) const {
  return K * x + apply_transpose(apply(x));
}

Matrix StructureMatrix::dense() const {
  const auto p = static_cast<Eigen::Index>(p_);
  if (is_identity()) return Matrix::Identity(p, p);
  Matrix f = Matrix::Zero(p - 1, p);
  for (Eigen::Index j = 0; j + 1 < p; ++j) {
    f(j, j) = 1.0;
    f(j, j + 1) = -1.0;
  }
  return f;
}

StructureMatrix build_structure_matrix(StructureType type, std::size_t p) {
  return StructureMatrix(type, p);
}

double eta_for(std::size_t K) {
  if (K < 1) throw InvalidArgument("eta_for: K must be at least 1");
  return static_cast<double>(K) + 4.01;
}

}  // namespace crsvm

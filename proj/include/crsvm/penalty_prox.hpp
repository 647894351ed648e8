#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace crsvm {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// ---------------------------------------------------------------------------
// Model kinds
// ---------------------------------------------------------------------------

enum class LossType {
  Hinge,
  LeastSquares,
  SquareHinge,
  HuberizedHinge,
  Pinball,
  HuberizedPinball
};

/// Margin loss L(r) applied to r = 1 - y (x'beta + beta0).
///
/// Scalings are chosen so that prox_loss is the exact proximal map:
///   Hinge             [r]_+
///   LeastSquares      r^2
///   SquareHinge       [r]_+^2 / 2
///   HuberizedHinge    0 | r^2/(2 delta) | r - delta/2
///   Pinball           r for r >= 0, -tau r otherwise
///   HuberizedPinball  r - delta/2 | r^2/(2 delta) | tau r^2/(2 delta)
///                     | -tau (r + delta/2), split at delta, 0, -delta
struct LossKind {
  LossType type = LossType::Hinge;
  double tau = 0.5;    // pinball variants, in (0, 1]
  double delta = 1.0;  // huberized variants, > 0

  void validate() const;
  bool uses_tau() const;
  bool uses_delta() const;
};

enum class SparseType { L1, SCAD, MCP };

struct SparsePenaltyKind {
  SparseType type = SparseType::L1;
  double a = 3.7;  // concavity; SCAD needs a > 2, MCP a > 0

  void validate() const;
  bool is_convex() const { return type == SparseType::L1; }
};

enum class StructureType { Ridge, Fusion, Group };

/// Ordered, contiguous, disjoint cover of the coefficient indices 0..p-1.
class GroupPartition {
 public:
  struct Block {
    std::size_t start = 0;
    std::size_t size = 0;
  };

  GroupPartition() = default;
  explicit GroupPartition(std::vector<Block> blocks,
                          std::vector<std::string> names = {});

  /// Builds a partition from consecutive block sizes.
  static GroupPartition from_sizes(const std::vector<std::size_t>& sizes,
                                   std::vector<std::string> names = {});

  const std::vector<Block>& blocks() const { return blocks_; }
  const std::vector<std::string>& names() const { return names_; }
  std::size_t num_groups() const { return blocks_.size(); }
  std::size_t dimension() const;
  std::vector<std::size_t> sizes() const;

  /// Throws unless the blocks cover exactly {0, ..., p-1}.
  void validate(std::size_t p) const;

 private:
  std::vector<Block> blocks_;
  std::vector<std::string> names_;
};

struct StructurePenaltyKind {
  StructureType type = StructureType::Ridge;
  GroupPartition groups;  // used only when type == Group

  void validate(std::size_t p) const;
};

std::string to_string(LossType t);
std::string to_string(SparseType t);
std::string to_string(StructureType t);
LossType parse_loss_type(std::string_view s);
SparseType parse_sparse_type(std::string_view s);
StructureType parse_structure_type(std::string_view s);

// ---------------------------------------------------------------------------
// Scalar / vector proximal kernels
// ---------------------------------------------------------------------------

/// sign(v) * max(|v| - kappa, 0).
double soft_threshold(double v, double kappa);
Vector soft_threshold(const Vector& v, double kappa);

/// Elementwise thresholds, kappa.size() == v.size().
Vector soft_threshold(const Vector& v, const Vector& kappa);

/// (x / ||x||) * max(||x|| - kappa, 0), zero vector when ||x|| <= kappa.
Vector group_soft_threshold(const Vector& x, double kappa);

/// Minimizer of P_lambda2(theta) + (mu/2) ||theta - u||^2 for the given
/// structure penalty (ridge: lambda2 ||.||^2, fusion: lambda2 ||.||_1,
/// group: lambda2 sum_m ||.||_2).
Vector theta_update(const StructurePenaltyKind& kind, const Vector& u,
                    double lambda2, double mu);

/// Minimizer of L(xi) + (n_mu / 2) (xi - zeta)^2.
double prox_loss(const LossKind& kind, double zeta, double n_mu);

/// L(r) under the scalings documented on LossKind.
double loss_value(const LossKind& kind, double r);

/// LLA weight P'_lambda1(|beta|).
double penalty_weight(const SparsePenaltyKind& kind, double abs_beta,
                      double lambda1);

/// P_lambda1(|beta|) itself (SCAD / MCP closed forms, lambda1 |beta| for L1).
double penalty_value(const SparsePenaltyKind& kind, double abs_beta,
                     double lambda1);

// ---------------------------------------------------------------------------
// Structure matrix G
// ---------------------------------------------------------------------------

/// Implicit G: identity for Ridge/Group, the (p-1) x p first-difference
/// matrix F (row j: e_j - e_{j+1}) for Fusion. Products are O(p).
class StructureMatrix {
 public:
  StructureMatrix(StructureType type, std::size_t p);

  StructureType type() const { return type_; }
  std::size_t cols() const { return p_; }
  std::size_t rows() const;
  bool is_identity() const { return type_ != StructureType::Fusion; }

  Vector apply(const Vector& x) const;
  Vector apply_transpose(const Vector& y) const;

  /// (K I + G'G) x.
  Vector apply_normal(const Vector& x, double K) const;

  /// Dense copy, for small-scale references only.
  Matrix dense() const;

 private:
  StructureType type_;
  std::size_t p_;
};

StructureMatrix build_structure_matrix(StructureType type, std::size_t p);

/// Linearization constant for the fused beta step; exceeds the largest
/// eigenvalue of K I + F'F for every p.
double eta_for(std::size_t K);

}  // namespace crsvm

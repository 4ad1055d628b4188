#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "bemdc/geometry.hpp"
#include "bemdc/kernel.hpp"

namespace bemdc {

/// One diffusion-curve segment with constant color jump `w_d` and
/// normal-derivative jump `w_c`.
///
/// The handle normal is rot90_ccw(p1 - p0) / length. With the jump term
/// f = -int dG/dn_z w_d + int G w_c, the reconstruction satisfies
/// u(+) - u(-) = w_d where "+" is the side the normal points away from,
/// so handle_side_colors() returns (c_avg + w_d/2) for that side.
struct Handle {
  Point2 p0 = Point2::Zero();
  Point2 p1 = Point2::Zero();
  Rgb w_d = Rgb::Zero();
  Rgb w_c = Rgb::Zero();
  SubdomainId owner = 0;

  double length() const { return (p1 - p0).norm(); }
  Vec2 normal() const { return rot90_ccw(p1 - p0) / length(); }
};

/// Number of quadrature pieces a handle is split into: ceil(length / h_max), at least 1.
int handle_pieces(double length, double h_max);

/// Minimum-norm solver for a square matrix with a one-dimensional nullspace.
/// Built once from an SVD with the smallest singular triplet discarded.
class PseudoSolver {
 public:
  PseudoSolver() = default;

  /// Throws std::runtime_error if more than one singular value is
  /// negligible (sigma_{n-2} / sigma_max < 1e-10).
  explicit PseudoSolver(const Eigen::MatrixXd& matrix);

  /// Applies the truncated pseudo-inverse column by column.
  Eigen::MatrixXd solve(const Eigen::MatrixXd& rhs) const;

  Eigen::Index size() const { return pseudo_inverse_.rows(); }
  const Eigen::VectorXd& singular_values() const { return singular_values_; }
  /// Right singular vector of the discarded singular value.
  const Eigen::VectorXd& discarded_direction() const { return discarded_; }

  /// Number of factorizations performed by this process.
  static std::uint64_t factorization_count();

 private:
  Eigen::MatrixXd pseudo_inverse_;
  Eigen::VectorXd singular_values_;
  Eigen::VectorXd discarded_;
};

PseudoSolver factorize(const Eigen::MatrixXd& matrix);

/// Galerkin matrix for the Neumann problem on a closed element loop.
/// A[i][i] = length_i / 2 (the coincident double-layer integral vanishes on a
/// straight element); off-diagonal entries use 3x3 tensor Gauss quadrature.
Eigen::MatrixXd assemble_system(std::span<const BoundaryElement> elements);

/// Discretized outer boundary of one subdomain with its factorized matrix.
struct SubdomainSystem {
  SubdomainBoundary boundary;
  std::vector<BoundaryElement> elements;
  Eigen::MatrixXd matrix;
  PseudoSolver solver;
  Rgb mean_color = Rgb::Zero();

  // 3 Gauss nodes per element: positions and weight * outward normal.
  Eigen::Matrix2Xd quad_points;
  Eigen::Matrix2Xd quad_weighted_normals;

  static SubdomainSystem build(const SubdomainBoundary& boundary, double h_max);

  Eigen::Index size() const { return static_cast<Eigen::Index>(elements.size()); }
};

/// Row W(x) with W_j = int_{Gamma_j} dG/dn_y(x, y) dy (unregularized, 3-point Gauss).
Eigen::RowVectorXd boundary_weights(const SubdomainSystem& system, const Point2& x);
/// Boundary weights for a batch of points, one row per point.
Eigen::MatrixXd boundary_weights(const SubdomainSystem& system, std::span<const Point2> xs);

/// Unit-weight potentials of one handle at x: f_h(x) = double_layer * w_d + single_layer * w_c.
struct HandlePotentials {
  double double_layer = 0.0;
  double single_layer = 0.0;
};
HandlePotentials handle_potentials(const Point2& x, const Handle& handle, const KernelParams& params);

/// Jump term f(x; theta) summed over handles.
Rgb eval_f(const Point2& x, std::span<const Handle> handles, const KernelParams& params);

/// Galerkin right-hand side: row i = int_{Gamma_i} f dx (3-point Gauss), N x 3.
Eigen::MatrixXd assemble_rhs(std::span<const BoundaryElement> elements, std::span<const Handle> handles,
                             const KernelParams& params);

/// Minimum-norm boundary values for every column of `rhs`.
/// Throws std::invalid_argument on a row-count mismatch.
Eigen::MatrixXd solve_boundary(const SubdomainSystem& system, const Eigen::MatrixXd& rhs);

/// u(x) = -W(x) u_bar + f(x) + b for x strictly inside the subdomain.
Rgb eval_solution(const Point2& x, const SubdomainSystem& system, const Eigen::MatrixXd& u_bar,
                  std::span<const Handle> handles, const KernelParams& params);
/// Same as eval_solution() with precomputed boundary weights.
Rgb eval_solution(const Eigen::RowVectorXd& weights, const Point2& x, const SubdomainSystem& system,
                  const Eigen::MatrixXd& u_bar, std::span<const Handle> handles, const KernelParams& params);

/// Colors on the two sides of a handle: (c_avg + w_d/2, c_avg - w_d/2), c_avg
/// being the reconstruction at the handle midpoint.
std::pair<Rgb, Rgb> handle_side_colors(const Handle& handle, const SubdomainSystem& system,
                                       const Eigen::MatrixXd& u_bar, std::span<const Handle> handles,
                                       const KernelParams& params);

/// Net normal-derivative flux sum_k length_k * w_c,k of a handle set, per channel.
Rgb compatibility_residual(std::span<const Handle> handles);

/// Minimum-norm correction of w_c onto sum_k length_k * w_c,k = 0 per channel,
/// using the current handle lengths.
void reproject_wc(std::span<Handle> handles);

}  // namespace bemdc

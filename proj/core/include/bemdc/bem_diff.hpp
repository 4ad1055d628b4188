#pragma once

#include <array>
#include <span>

#include <Eigen/Core>

#include "bemdc/bem_forward.hpp"

namespace bemdc {

/// Parameter vector layout: 10 contiguous scalars per handle,
/// [p0.x, p0.y, p1.x, p1.y, w_d.r, w_d.g, w_d.b, w_c.r, w_c.g, w_c.b].
/// The subdomain mean color is not part of it.
struct ParamLayout {
  static constexpr int kPerHandle = 10;
  static constexpr int kP0x = 0;
  static constexpr int kP0y = 1;
  static constexpr int kP1x = 2;
  static constexpr int kP1y = 3;
  static constexpr int kWd = 4;  // + channel
  static constexpr int kWc = 7;  // + channel

  static Eigen::Index index(std::size_t handle, int slot) {
    return static_cast<Eigen::Index>(handle) * kPerHandle + slot;
  }
  static Eigen::Index size(std::size_t handle_count) {
    return static_cast<Eigen::Index>(handle_count) * kPerHandle;
  }
};

Eigen::VectorXd pack_params(std::span<const Handle> handles);
void unpack_params(const Eigen::VectorXd& theta, std::span<Handle> handles);

/// du/dtheta at one point; rows are RGB channels.
using JacobianBlock = Eigen::Matrix<double, 3, Eigen::Dynamic>;

/// Per-channel stack of boundary right-hand sides or solutions, each N x P.
using ChannelStack = std::array<Eigen::MatrixXd, 3>;

/// Unit-weight handle potentials and their derivatives with respect to the
/// endpoint coordinates (p0.x, p0.y, p1.x, p1.y). Every column of the
/// Jacobian of f is a combination of these ten scalar fields.
struct HandleBasis {
  double double_layer = 0.0;
  double single_layer = 0.0;
  Eigen::Vector4d d_double_layer = Eigen::Vector4d::Zero();
  Eigen::Vector4d d_single_layer = Eigen::Vector4d::Zero();
};

/// Number of scalar basis fields per handle, laid out as
/// [double_layer, single_layer, d_double_layer(4), d_single_layer(4)].
inline constexpr int kBasisPerHandle = 10;

HandleBasis handle_basis(const Point2& x, const Handle& handle, const KernelParams& params);

/// Writes the 10 * handles.size() basis values at x into `out`.
void handle_basis_row(const Point2& x, std::span<const Handle> handles, const KernelParams& params,
                      std::span<double> out);

/// Maps basis values (local or boundary-corrected) to the reconstruction
/// without mean color and to the 3 x P Jacobian.
void expand_basis_row(std::span<const double> basis, std::span<const Handle> handles, Rgb* u_without_mean,
                      JacobianBlock* jacobian);

/// Analytic d f / d theta at x.
JacobianBlock eval_df(const Point2& x, std::span<const Handle> handles, const KernelParams& params);

/// Galerkin right-hand sides of the differential problem, one N x P matrix per channel.
ChannelStack assemble_drhs(std::span<const BoundaryElement> elements, std::span<const Handle> handles,
                           const KernelParams& params);

/// N x (10 H) right-hand sides of the basis fields.
Eigen::MatrixXd assemble_basis_rhs(std::span<const BoundaryElement> elements, std::span<const Handle> handles,
                                   const KernelParams& params);

/// Solves every channel of a differential right-hand side with the forward factorization.
ChannelStack solve_drhs(const SubdomainSystem& system, const ChannelStack& drhs);

/// J(x) = -W(x) du_bar + df(x).
JacobianBlock eval_jacobian(const Point2& x, const SubdomainSystem& system, const ChannelStack& du_bar,
                            std::span<const Handle> handles, const KernelParams& params);
JacobianBlock eval_jacobian(const Eigen::RowVectorXd& weights, const Point2& x, const ChannelStack& du_bar,
                            std::span<const Handle> handles, const KernelParams& params);

}  // namespace bemdc

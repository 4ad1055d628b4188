#include "bemdc/bem_diff.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace bemdc {

Eigen::VectorXd pack_params(std::span<const Handle> handles) {
  Eigen::VectorXd theta(ParamLayout::size(handles.size()));
  for (std::size_t k = 0; k < handles.size(); ++k) {
    const Handle& h = handles[k];
    auto seg = theta.segment<ParamLayout::kPerHandle>(ParamLayout::index(k, 0));
    seg << h.p0, h.p1, h.w_d, h.w_c;
  }
  return theta;
}

void unpack_params(const Eigen::VectorXd& theta, std::span<Handle> handles) {
  if (theta.size() != ParamLayout::size(handles.size()))
    throw std::invalid_argument("unpack_params: parameter vector size mismatch");
  for (std::size_t k = 0; k < handles.size(); ++k) {
    const auto seg = theta.segment<ParamLayout::kPerHandle>(ParamLayout::index(k, 0));
    handles[k].p0 = seg.segment<2>(0);
    handles[k].p1 = seg.segment<2>(2);
    handles[k].w_d = seg.segment<3>(4);
    handles[k].w_c = seg.segment<3>(7);
  }
}

HandleBasis handle_basis(const Point2& x, const Handle& handle, const KernelParams& params) {
  const Vec2 d = handle.p1 - handle.p0;
  const double length = d.norm();
  const Vec2 m = rot90_ccw(d);
  const int pieces = handle_pieces(length, params.h_max);
  const double eps2 = params.epsilon * params.epsilon;
  const Vec2 base = handle.p0 - x;
  const double m_dot_r = m.dot(base);

  // Accumulated over s in [0,1] with piece width folded in at the end.
  double k_sum = 0.0;       // sum w / q
  double log_sum = 0.0;     // sum w log q
  Vec2 dk_dy_p0 = Vec2::Zero(), dk_dy_p1 = Vec2::Zero();
  Vec2 dk_dm = Vec2::Zero();
  Vec2 dg_dy_p0 = Vec2::Zero(), dg_dy_p1 = Vec2::Zero();

  for (int k = 0; k < pieces; ++k) {
    for (int g = 0; g < 3; ++g) {
      const double s = (k + kGauss3Nodes01[g]) / pieces;
      const double w = kGauss3Weights01[g];
      const Vec2 r = base + s * d;
      const double q = r.squaredNorm() + eps2;
      const double inv_q = 1.0 / q;
      k_sum += w * inv_q;
      log_sum += w * std::log(q);
      // Kernel gradients without the -1/2pi prefactor.
      const Vec2 dk_dy = inv_q * (m - (2.0 * m_dot_r * inv_q) * r);
      const Vec2 dg_dy = inv_q * r;
      dk_dy_p0 += (w * (1.0 - s)) * dk_dy;
      dk_dy_p1 += (w * s) * dk_dy;
      dk_dm += (w * inv_q) * r;
      dg_dy_p0 += (w * (1.0 - s)) * dg_dy;
      dg_dy_p1 += (w * s) * dg_dy;
    }
  }
  const double piece = 1.0 / pieces;

  HandleBasis out;
  // double_layer = -int K ds with K = -(1/2pi) m.(z - x) / q.
  out.double_layer = kInvTwoPi * m_dot_r * k_sum * piece;
  // d(-K)/dp = (1/2pi) [dz/dp^T dK'/dy + dm/dp^T dK'/dm], K' = m.(z-x)/q,
  // with dm/dp1 = R, dm/dp0 = -R and R^T v = rot90_cw(v).
  const Vec2 m_term = rot90_cw(dk_dm);
  const Vec2 dA_p0 = kInvTwoPi * piece * (dk_dy_p0 - m_term);
  const Vec2 dA_p1 = kInvTwoPi * piece * (dk_dy_p1 + m_term);
  out.d_double_layer << dA_p0, dA_p1;

  // single_layer = length * int G ds with G = -(1/4pi) log q.
  const double g_mean = -0.25 * std::numbers::inv_pi * log_sum * piece;
  out.single_layer = length * g_mean;
  const Vec2 unit = d / length;
  const Vec2 dB_p0 = -unit * g_mean - kInvTwoPi * length * piece * dg_dy_p0;
  const Vec2 dB_p1 = unit * g_mean - kInvTwoPi * length * piece * dg_dy_p1;
  out.d_single_layer << dB_p0, dB_p1;
  return out;
}

void handle_basis_row(const Point2& x, std::span<const Handle> handles, const KernelParams& params,
                      std::span<double> out) {
  if (out.size() != handles.size() * kBasisPerHandle)
    throw std::invalid_argument("handle_basis_row: output size mismatch");
  for (std::size_t k = 0; k < handles.size(); ++k) {
    const HandleBasis b = handle_basis(x, handles[k], params);
    double* o = out.data() + k * kBasisPerHandle;
    o[0] = b.double_layer;
    o[1] = b.single_layer;
    for (int i = 0; i < 4; ++i) {
      o[2 + i] = b.d_double_layer(i);
      o[6 + i] = b.d_single_layer(i);
    }
  }
}

void expand_basis_row(std::span<const double> basis, std::span<const Handle> handles, Rgb* u_without_mean,
                      JacobianBlock* jacobian) {
  if (basis.size() != handles.size() * kBasisPerHandle)
    throw std::invalid_argument("expand_basis_row: basis size mismatch");
  if (u_without_mean) u_without_mean->setZero();
  if (jacobian) jacobian->setZero(3, ParamLayout::size(handles.size()));
  for (std::size_t k = 0; k < handles.size(); ++k) {
    const double* b = basis.data() + k * kBasisPerHandle;
    const Handle& h = handles[k];
    if (u_without_mean) *u_without_mean += b[0] * h.w_d + b[1] * h.w_c;
    if (!jacobian) continue;
    const Eigen::Index col = ParamLayout::index(k, 0);
    for (int c = 0; c < 3; ++c) {
      for (int g = 0; g < 4; ++g) (*jacobian)(c, col + g) = h.w_d(c) * b[2 + g] + h.w_c(c) * b[6 + g];
      (*jacobian)(c, col + ParamLayout::kWd + c) = b[0];
      (*jacobian)(c, col + ParamLayout::kWc + c) = b[1];
    }
  }
}

JacobianBlock eval_df(const Point2& x, std::span<const Handle> handles, const KernelParams& params) {
  std::vector<double> basis(handles.size() * kBasisPerHandle);
  handle_basis_row(x, handles, params, basis);
  JacobianBlock df;
  expand_basis_row(basis, handles, nullptr, &df);
  return df;
}

ChannelStack assemble_drhs(std::span<const BoundaryElement> elements, std::span<const Handle> handles,
                           const KernelParams& params) {
  const auto n = static_cast<Eigen::Index>(elements.size());
  const Eigen::Index p = ParamLayout::size(handles.size());
  ChannelStack out;
  for (auto& m : out) m = Eigen::MatrixXd::Zero(n, p);
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < n; ++i) {
    JacobianBlock row = JacobianBlock::Zero(3, p);
    for (const auto& q : gauss3(elements[i].a, elements[i].b)) row += q.weight * eval_df(q.point, handles, params);
    for (int c = 0; c < 3; ++c) out[c].row(i) = row.row(c);
  }
  return out;
}

Eigen::MatrixXd assemble_basis_rhs(std::span<const BoundaryElement> elements, std::span<const Handle> handles,
                                   const KernelParams& params) {
  const auto n = static_cast<Eigen::Index>(elements.size());
  const auto cols = static_cast<Eigen::Index>(handles.size() * kBasisPerHandle);
  // Row-major so each element's row is contiguous for the writer thread.
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rhs =
      Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>::Zero(n, cols);
  if (cols == 0) return rhs;
#pragma omp parallel
  {
    std::vector<double> scratch(static_cast<std::size_t>(cols));
#pragma omp for schedule(static)
    for (Eigen::Index i = 0; i < n; ++i) {
      for (const auto& q : gauss3(elements[i].a, elements[i].b)) {
        handle_basis_row(q.point, handles, params, scratch);
        for (Eigen::Index c = 0; c < cols; ++c) rhs(i, c) += q.weight * scratch[static_cast<std::size_t>(c)];
      }
    }
  }
  return rhs;
}

ChannelStack solve_drhs(const SubdomainSystem& system, const ChannelStack& drhs) {
  ChannelStack out;
  for (int c = 0; c < 3; ++c) out[c] = system.solver.solve(drhs[c]);
  return out;
}

JacobianBlock eval_jacobian(const Eigen::RowVectorXd& weights, const Point2& x, const ChannelStack& du_bar,
                            std::span<const Handle> handles, const KernelParams& params) {
  JacobianBlock j = eval_df(x, handles, params);
  for (int c = 0; c < 3; ++c) j.row(c) -= weights * du_bar[c];
  return j;
}

JacobianBlock eval_jacobian(const Point2& x, const SubdomainSystem& system, const ChannelStack& du_bar,
                            std::span<const Handle> handles, const KernelParams& params) {
  return eval_jacobian(boundary_weights(system, x), x, du_bar, handles, params);
}

}  // namespace bemdc

#pragma once

#include <cmath>
#include <numbers>

#include "bemdc/geometry.hpp"

namespace bemdc {

inline constexpr double kInvTwoPi = 0.5 / std::numbers::pi;

/// Regularization of the handle kernels. `epsilon` replaces r by
/// sqrt(r^2 + epsilon^2); `h_max` bounds the length of the quadrature pieces
/// a handle is split into.
struct KernelParams {
  double epsilon = 1e-2;
  double h_max = 1.0 / 256.0;
};

/// Free-space Green's function of the 2D Laplacian, -(1/2pi) log sqrt(r^2 + eps^2).
/// Throws std::domain_error when eps == 0 and x == y.
double green(const Point2& x, const Point2& y, double eps);

/// Normal derivative with respect to y: -(1/2pi) n.(y - x) / (r^2 + eps^2).
double green_dn(const Point2& x, const Point2& y, const Vec2& n, double eps);

/// Spatial derivatives of green() and of the scaled double-layer kernel
/// K(x, y, m) = -(1/2pi) m.(y - x) / (r^2 + eps^2) with unnormalized m.
struct KernelGrads {
  Vec2 dG_dy;
  Vec2 dK_dy;
  Vec2 dK_dm;
};

KernelGrads kernel_grads(const Point2& x, const Point2& y, const Vec2& m, double eps);

namespace detail {

// Unchecked versions for inner loops. `q` is r^2 + eps^2 > 0.
inline double green_q(double q) { return -0.25 * std::numbers::inv_pi * std::log(q); }
inline double double_layer_q(const Vec2& m, const Vec2& d, double q) { return -kInvTwoPi * m.dot(d) / q; }

}  // namespace detail

}  // namespace bemdc

#include "bemdc/kernel.hpp"

#include <cmath>
#include <stdexcept>

namespace bemdc {

namespace {

double regularized_r2(const Point2& x, const Point2& y, double eps, const char* who) {
  if (eps < 0.0) throw std::domain_error(std::string(who) + ": negative regularization");
  const double q = (y - x).squaredNorm() + eps * eps;
  if (q == 0.0) throw std::domain_error(std::string(who) + ": singular evaluation (x == y, eps == 0)");
  return q;
}

}  // namespace

double green(const Point2& x, const Point2& y, double eps) {
  return detail::green_q(regularized_r2(x, y, eps, "green"));
}

double green_dn(const Point2& x, const Point2& y, const Vec2& n, double eps) {
  return detail::double_layer_q(n, y - x, regularized_r2(x, y, eps, "green_dn"));
}

KernelGrads kernel_grads(const Point2& x, const Point2& y, const Vec2& m, double eps) {
  const Vec2 d = y - x;
  const double q = regularized_r2(x, y, eps, "kernel_grads");
  const double inv_q = 1.0 / q;
  const double md = m.dot(d);
  KernelGrads out;
  out.dG_dy = -kInvTwoPi * inv_q * d;
  out.dK_dy = -kInvTwoPi * inv_q * (m - (2.0 * md * inv_q) * d);
  out.dK_dm = -kInvTwoPi * inv_q * d;
  return out;
}

}  // namespace bemdc

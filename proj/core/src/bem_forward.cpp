#include "bemdc/bem_forward.hpp"

#include <atomic>
#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/SVD>

namespace bemdc {

namespace {

std::atomic<std::uint64_t> g_factorizations{0};

constexpr double kRankTolerance = 1e-10;

}  // namespace

int handle_pieces(double length, double h_max) {
  return std::max(1, static_cast<int>(std::ceil(length / h_max)));
}

PseudoSolver::PseudoSolver(const Eigen::MatrixXd& matrix) {
  if (matrix.rows() != matrix.cols() || matrix.rows() < 2)
    throw std::invalid_argument("PseudoSolver: matrix must be square with size >= 2");
  Eigen::BDCSVD<Eigen::MatrixXd> svd(matrix, Eigen::ComputeFullU | Eigen::ComputeFullV);
  ++g_factorizations;
  singular_values_ = svd.singularValues();
  const Eigen::Index n = singular_values_.size();
  const double sigma_max = singular_values_(0);
  if (!(sigma_max > 0.0) || singular_values_(n - 2) / sigma_max < kRankTolerance) {
    throw std::runtime_error("PseudoSolver: unexpected rank deficiency (sigma_{n-2}/sigma_max = " +
                             std::to_string(sigma_max > 0.0 ? singular_values_(n - 2) / sigma_max : 0.0) +
                             ")");
  }
  Eigen::VectorXd inv = singular_values_.cwiseInverse();
  inv(n - 1) = 0.0;
  pseudo_inverse_ = svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
  discarded_ = svd.matrixV().col(n - 1);
}

Eigen::MatrixXd PseudoSolver::solve(const Eigen::MatrixXd& rhs) const {
  if (rhs.rows() != pseudo_inverse_.cols())
    throw std::invalid_argument("PseudoSolver::solve: right-hand side has " + std::to_string(rhs.rows()) +
                                " rows, expected " + std::to_string(pseudo_inverse_.cols()));
  return pseudo_inverse_ * rhs;
}

std::uint64_t PseudoSolver::factorization_count() { return g_factorizations.load(); }

PseudoSolver factorize(const Eigen::MatrixXd& matrix) { return PseudoSolver(matrix); }

Eigen::MatrixXd assemble_system(std::span<const BoundaryElement> elements) {
  const auto n = static_cast<Eigen::Index>(elements.size());
  if (n < 3) throw std::invalid_argument("assemble_system: need at least 3 elements");
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& cur = elements[i];
    const auto& next = elements[(i + 1) % n];
    if ((cur.b - next.a).norm() > 1e-12 * std::max(1.0, cur.length))
      throw std::invalid_argument("assemble_system: element loop is not closed at element " + std::to_string(i));
  }

  std::vector<std::array<QuadNode, 3>> nodes(elements.size());
  for (Eigen::Index i = 0; i < n; ++i) nodes[i] = gauss3(elements[i].a, elements[i].b);

  Eigen::MatrixXd a(n, n);
#pragma omp parallel for schedule(static)
  for (Eigen::Index j = 0; j < n; ++j) {
    const Vec2& ny = elements[j].outward_normal;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (i == j) {
        a(i, j) = 0.5 * elements[i].length;
        continue;
      }
      double sum = 0.0;
      for (const auto& qx : nodes[i]) {
        for (const auto& qy : nodes[j]) {
          const Vec2 d = qy.point - qx.point;
          sum += qx.weight * qy.weight * detail::double_layer_q(ny, d, d.squaredNorm());
        }
      }
      a(i, j) = sum;
    }
  }
  return a;
}

SubdomainSystem SubdomainSystem::build(const SubdomainBoundary& boundary, double h_max) {
  SubdomainSystem s;
  s.boundary = boundary;
  s.elements = discretize_boundary(boundary, h_max);
  s.matrix = assemble_system(s.elements);
  s.solver = factorize(s.matrix);
  const auto n = s.size();
  s.quad_points.resize(2, 3 * n);
  s.quad_weighted_normals.resize(2, 3 * n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const auto q = gauss3(s.elements[j].a, s.elements[j].b);
    for (int k = 0; k < 3; ++k) {
      s.quad_points.col(3 * j + k) = q[k].point;
      s.quad_weighted_normals.col(3 * j + k) = q[k].weight * s.elements[j].outward_normal;
    }
  }
  return s;
}

Eigen::RowVectorXd boundary_weights(const SubdomainSystem& system, const Point2& x) {
  const auto n = system.size();
  Eigen::RowVectorXd w(n);
  const double* p = system.quad_points.data();
  const double* wn = system.quad_weighted_normals.data();
  for (Eigen::Index j = 0; j < n; ++j) {
    double sum = 0.0;
    for (int k = 0; k < 3; ++k) {
      const Eigen::Index c = 2 * (3 * j + k);
      const double dx = p[c] - x.x();
      const double dy = p[c + 1] - x.y();
      sum += (wn[c] * dx + wn[c + 1] * dy) / (dx * dx + dy * dy);
    }
    w(j) = -kInvTwoPi * sum;
  }
  return w;
}

Eigen::MatrixXd boundary_weights(const SubdomainSystem& system, std::span<const Point2> xs) {
  Eigen::MatrixXd w(static_cast<Eigen::Index>(xs.size()), system.size());
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < xs.size(); ++i) w.row(static_cast<Eigen::Index>(i)) = boundary_weights(system, xs[i]);
  return w;
}

HandlePotentials handle_potentials(const Point2& x, const Handle& handle, const KernelParams& params) {
  const Vec2 d = handle.p1 - handle.p0;
  const double length = d.norm();
  const Vec2 m = rot90_ccw(d);
  const int pieces = handle_pieces(length, params.h_max);
  const double eps2 = params.epsilon * params.epsilon;
  // m.(z - x) is constant along the segment because m is perpendicular to d.
  const Vec2 base = handle.p0 - x;
  const double m_dot_r = m.dot(base);
  double inv_q_sum = 0.0;
  double log_q_sum = 0.0;
  for (int k = 0; k < pieces; ++k) {
    for (int g = 0; g < 3; ++g) {
      const double s = (k + kGauss3Nodes01[g]) / pieces;
      const double w = kGauss3Weights01[g];
      const Vec2 r = base + s * d;
      const double q = r.squaredNorm() + eps2;
      inv_q_sum += w / q;
      log_q_sum += w * std::log(q);
    }
  }
  HandlePotentials out;
  // -K integrated over s in [0,1]; the 1/pieces factor is the piece width.
  out.double_layer = kInvTwoPi * m_dot_r * inv_q_sum / pieces;
  out.single_layer = -0.25 * std::numbers::inv_pi * length * log_q_sum / pieces;
  return out;
}

Rgb eval_f(const Point2& x, std::span<const Handle> handles, const KernelParams& params) {
  Rgb f = Rgb::Zero();
  for (const auto& h : handles) {
    const auto pot = handle_potentials(x, h, params);
    f += pot.double_layer * h.w_d + pot.single_layer * h.w_c;
  }
  return f;
}

Eigen::MatrixXd assemble_rhs(std::span<const BoundaryElement> elements, std::span<const Handle> handles,
                             const KernelParams& params) {
  const auto n = static_cast<Eigen::Index>(elements.size());
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(n, 3);
  if (handles.empty()) return rhs;
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < n; ++i) {
    Rgb row = Rgb::Zero();
    for (const auto& q : gauss3(elements[i].a, elements[i].b)) row += q.weight * eval_f(q.point, handles, params);
    rhs.row(i) = row.transpose();
  }
  return rhs;
}

Eigen::MatrixXd solve_boundary(const SubdomainSystem& system, const Eigen::MatrixXd& rhs) {
  return system.solver.solve(rhs);
}

Rgb eval_solution(const Eigen::RowVectorXd& weights, const Point2& x, const SubdomainSystem& system,
                  const Eigen::MatrixXd& u_bar, std::span<const Handle> handles, const KernelParams& params) {
  const Rgb boundary_term = -(weights * u_bar).transpose();
  return boundary_term + eval_f(x, handles, params) + system.mean_color;
}

Rgb eval_solution(const Point2& x, const SubdomainSystem& system, const Eigen::MatrixXd& u_bar,
                  std::span<const Handle> handles, const KernelParams& params) {
  return eval_solution(boundary_weights(system, x), x, system, u_bar, handles, params);
}

std::pair<Rgb, Rgb> handle_side_colors(const Handle& handle, const SubdomainSystem& system,
                                       const Eigen::MatrixXd& u_bar, std::span<const Handle> handles,
                                       const KernelParams& params) {
  const Rgb avg = eval_solution(0.5 * (handle.p0 + handle.p1), system, u_bar, handles, params);
  return {avg + 0.5 * handle.w_d, avg - 0.5 * handle.w_d};
}

Rgb compatibility_residual(std::span<const Handle> handles) {
  Rgb flux = Rgb::Zero();
  for (const auto& h : handles) flux += h.length() * h.w_c;
  return flux;
}

void reproject_wc(std::span<Handle> handles) {
  double len2 = 0.0;
  for (const auto& h : handles) len2 += h.length() * h.length();
  if (len2 == 0.0) return;
  const Rgb scale = compatibility_residual(handles) / len2;
  for (auto& h : handles) h.w_c -= h.length() * scale;
}

}  // namespace bemdc

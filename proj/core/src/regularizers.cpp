#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "bemdc/optimizer.hpp"

namespace bemdc {

namespace {

using Index = Eigen::Index;

Point2 endpoint(const Handle& h, int end) { return end == 0 ? h.p0 : h.p1; }

Vec2 unit_tangent(const Handle& h) { return (h.p1 - h.p0) / h.length(); }

double snap_score(const Handle& a, int end_a, const Handle& b, int end_b, const LMConfig& config) {
  const double d = (endpoint(a, end_a) - endpoint(b, end_b)).norm();
  return d / config.snap_distance + config.snap_dir_weight * (1.0 - std::abs(unit_tangent(a).dot(unit_tangent(b))));
}

// lambda t tanh(s / t), s = sqrt(w.w + eps^2).
double sparsity_value(const Rgb& w, double lambda, const LMConfig& config) {
  const double s = std::sqrt(w.squaredNorm() + config.sparsity_eps * config.sparsity_eps);
  return lambda * config.sparsity_t * std::tanh(s / config.sparsity_t);
}

void add_sparsity(NormalEquations& ne, Index offset, const Rgb& w, double lambda, const LMConfig& config) {
  const double t = config.sparsity_t;
  const double s = std::sqrt(w.squaredNorm() + config.sparsity_eps * config.sparsity_eps);
  const double th = std::tanh(s / t);
  const double sech2 = 1.0 - th * th;
  ne.g.segment<3>(offset) += lambda * sech2 * w / s;
  Eigen::Matrix3d hess = lambda * sech2 *
                         (Eigen::Matrix3d::Identity() / s - (w * w.transpose()) / (s * s * s) -
                          (2.0 * th / t) * (w * w.transpose()) / (s * s));
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(hess);
  hess = eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).asDiagonal() * eig.eigenvectors().transpose();
  ne.H.block<3, 3>(offset, offset) += hess;
}

}  // namespace

std::vector<SnapPair> find_snap_pairs(std::span<const Handle> handles, const LMConfig& config) {
  std::vector<SnapPair> pairs;
  if (!config.snapping_enabled || handles.size() < 2) return pairs;
  const std::size_t n = handles.size() * 2;
  std::vector<std::size_t> best(n, n);
  for (std::size_t e = 0; e < n; ++e) {
    const std::size_t ha = e / 2;
    const int ea = static_cast<int>(e % 2);
    double best_score = std::numeric_limits<double>::infinity();
    for (std::size_t f = 0; f < n; ++f) {
      const std::size_t hb = f / 2;
      if (hb == ha) continue;
      const int eb = static_cast<int>(f % 2);
      if ((endpoint(handles[ha], ea) - endpoint(handles[hb], eb)).norm() >= config.snap_distance) continue;
      const double score = snap_score(handles[ha], ea, handles[hb], eb, config);
      if (score < best_score) {
        best_score = score;
        best[e] = f;
      }
    }
  }
  for (std::size_t e = 0; e < n; ++e) {
    const std::size_t f = best[e];
    if (f < n && f > e && best[f] == e)
      pairs.push_back({e / 2, static_cast<int>(e % 2), f / 2, static_cast<int>(f % 2)});
  }
  return pairs;
}

double regularizer_loss(std::span<const Handle> handles, const LMConfig& config, std::span<const SnapPair> pairs) {
  double loss = 0.0;
  if (config.length_enabled) {
    for (const auto& h : handles) {
      const double excess = h.length() - config.length_threshold;
      if (excess > 0.0) loss += 0.5 * config.length_kappa * excess * excess;
    }
  }
  if (config.snapping_enabled) {
    for (const auto& p : pairs) {
      const Vec2 d = endpoint(handles[p.handle_a], p.end_a) - endpoint(handles[p.handle_b], p.end_b);
      loss += 0.5 * config.snap_kappa * d.squaredNorm();
    }
  }
  if (config.sparsity_enabled) {
    for (const auto& h : handles)
      loss += sparsity_value(h.w_d, config.lambda_w_d, config) + sparsity_value(h.w_c, config.lambda_w_c, config);
  }
  return loss;
}

void apply_regularizers(NormalEquations& ne, std::span<const Handle> handles, const LMConfig& config,
                        std::span<const SnapPair> pairs) {
  if (ne.g.size() != ParamLayout::size(handles.size()) || ne.H.rows() != ne.g.size() || ne.H.cols() != ne.g.size())
    throw std::invalid_argument("apply_regularizers: system size does not match the handle count");
  if (config.length_enabled) {
    for (std::size_t k = 0; k < handles.size(); ++k) {
      const double excess = handles[k].length() - config.length_threshold;
      if (excess <= 0.0) continue;
      const Vec2 t = unit_tangent(handles[k]);
      Eigen::Vector4d grad;
      grad << -t, t;
      const Index o = ParamLayout::index(k, ParamLayout::kP0x);
      ne.g.segment<4>(o) += config.length_kappa * excess * grad;
      ne.H.block<4, 4>(o, o) += config.length_kappa * grad * grad.transpose();
    }
  }
  if (config.snapping_enabled) {
    for (const auto& p : pairs) {
      const Index a = ParamLayout::index(p.handle_a, 2 * p.end_a);
      const Index b = ParamLayout::index(p.handle_b, 2 * p.end_b);
      const Vec2 d = endpoint(handles[p.handle_a], p.end_a) - endpoint(handles[p.handle_b], p.end_b);
      const double kappa = config.snap_kappa;
      ne.g.segment<2>(a) += kappa * d;
      ne.g.segment<2>(b) -= kappa * d;
      const Eigen::Matrix2d eye = kappa * Eigen::Matrix2d::Identity();
      ne.H.block<2, 2>(a, a) += eye;
      ne.H.block<2, 2>(b, b) += eye;
      ne.H.block<2, 2>(a, b) -= eye;
      ne.H.block<2, 2>(b, a) -= eye;
    }
  }
  if (config.sparsity_enabled) {
    for (std::size_t k = 0; k < handles.size(); ++k) {
      add_sparsity(ne, ParamLayout::index(k, ParamLayout::kWd), handles[k].w_d, config.lambda_w_d, config);
      add_sparsity(ne, ParamLayout::index(k, ParamLayout::kWc), handles[k].w_c, config.lambda_w_c, config);
    }
  }
}

void apply_regularizers(NormalEquations& ne, std::span<const Handle> handles, const LMConfig& config) {
  const auto pairs = find_snap_pairs(handles, config);
  apply_regularizers(ne, handles, config, pairs);
}

Eigen::VectorXd compatibility_direction(std::span<const Handle> handles, int channel) {
  Eigen::VectorXd n = Eigen::VectorXd::Zero(ParamLayout::size(handles.size()));
  for (std::size_t k = 0; k < handles.size(); ++k)
    n(ParamLayout::index(k, ParamLayout::kWc + channel)) = handles[k].length();
  return n;
}

Eigen::MatrixXd project_compatibility(NormalEquations& ne, std::span<const Handle> handles) {
  const Index size = ParamLayout::size(handles.size());
  if (handles.empty()) return Eigen::MatrixXd(size, 0);
  if (ne.g.size() != size) throw std::invalid_argument("project_compatibility: size mismatch");
  Eigen::MatrixXd v(size, 3);
  for (int c = 0; c < 3; ++c) v.col(c) = compatibility_direction(handles, c).normalized();
  // P H P = H - V (V^T H) - (H V) V^T + V (V^T H V) V^T
  const Eigen::MatrixXd hv = ne.H * v;
  const Eigen::Matrix3d vhv = v.transpose() * hv;
  ne.H -= hv * v.transpose();
  ne.H -= v * hv.transpose();
  ne.H += v * vhv * v.transpose();
  ne.H = 0.5 * (ne.H + ne.H.transpose()).eval();
  ne.g -= v * (v.transpose() * ne.g);
  return v;
}

Eigen::MatrixXd projector_from_basis(const Eigen::MatrixXd& v, Index size) {
  Eigen::MatrixXd p = Eigen::MatrixXd::Identity(size, size);
  if (v.cols() > 0) p -= v * v.transpose();
  return p;
}

std::optional<Eigen::VectorXd> lm_solve_step(const NormalEquations& ne, double lambda,
                                             const Eigen::MatrixXd* constraint_basis) {
  if (!(lambda > 0.0)) throw std::invalid_argument("lm_solve_step: lambda must be positive");
  const Index n = ne.g.size();
  if (n == 0) return Eigen::VectorXd();
  Eigen::VectorXd d = ne.H.diagonal();
  for (Index i = 0; i < n; ++i)
    if (d(i) == 0.0) d(i) = 1.0;
  Eigen::MatrixXd a = ne.H;
  a.diagonal() += lambda * d;
  if (constraint_basis && constraint_basis->cols() > 0) {
    const Eigen::MatrixXd& v = *constraint_basis;
    // lambda (P D P + V V^T) with P D P = D - V (V^T D) - (D V) V^T + V (V^T D V) V^T
    const Eigen::MatrixXd dv = d.asDiagonal() * v;
    const Eigen::MatrixXd vdv = v.transpose() * dv;
    a -= lambda * (dv * v.transpose() + v * dv.transpose());
    a += lambda * (v * (vdv + Eigen::MatrixXd::Identity(v.cols(), v.cols())) * v.transpose());
  }
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() != Eigen::Success) return std::nullopt;
  Eigen::VectorXd delta = -llt.solve(ne.g);
  if (!delta.allFinite()) return std::nullopt;
  return delta;
}

DampingUpdate update_damping(double loss_old, double loss_new, double lambda, const LMConfig& config) {
  if (loss_new < loss_old) return {true, lambda / config.lambda_down};
  return {false, lambda * config.lambda_up};
}

std::vector<Handle> prune_handles(std::vector<Handle> handles, const LMConfig& config) {
  if (!config.sparsity_enabled) return handles;
  std::erase_if(handles, [&](const Handle& h) {
    return h.w_d.norm() < config.prune_threshold && h.w_c.norm() < config.prune_threshold;
  });
  reproject_wc(handles);
  return handles;
}

}  // namespace bemdc

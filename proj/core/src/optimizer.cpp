#include "bemdc/optimizer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

#include <Eigen/SparseCore>
#include <boost/random/sobol.hpp>

namespace bemdc {

namespace {

using Index = Eigen::Index;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

constexpr int kPointChunk = 256;
constexpr Index kEvalChunk = 2048;
constexpr int kMaxFactorizationRetries = 60;
constexpr int kShrinkIterations = 32;

void require_positive(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument(std::string("LMConfig: ") + name + " must be positive");
}

// Maps the 10 basis fields of every handle to the parameters of one channel:
// J_c = Phi * S_c.
Eigen::SparseMatrix<double> channel_map(std::span<const Handle> handles, int c) {
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(handles.size() * 10);
  for (std::size_t k = 0; k < handles.size(); ++k) {
    const Index b = static_cast<Index>(k) * kBasisPerHandle;
    const Index p = ParamLayout::index(k, 0);
    for (int g = 0; g < 4; ++g) {
      t.emplace_back(b + 2 + g, p + g, handles[k].w_d(c));
      t.emplace_back(b + 6 + g, p + g, handles[k].w_c(c));
    }
    t.emplace_back(b + 0, p + ParamLayout::kWd + c, 1.0);
    t.emplace_back(b + 1, p + ParamLayout::kWc + c, 1.0);
  }
  Eigen::SparseMatrix<double> s(static_cast<Index>(handles.size()) * kBasisPerHandle,
                                ParamLayout::size(handles.size()));
  s.setFromTriplets(t.begin(), t.end());
  return s;
}

// Basis coefficients of the reconstruction itself: u = Phi * C.
Eigen::MatrixX3d value_map(std::span<const Handle> handles) {
  Eigen::MatrixX3d c = Eigen::MatrixX3d::Zero(static_cast<Index>(handles.size()) * kBasisPerHandle, 3);
  for (std::size_t k = 0; k < handles.size(); ++k) {
    c.row(static_cast<Index>(k) * kBasisPerHandle) = handles[k].w_d.transpose();
    c.row(static_cast<Index>(k) * kBasisPerHandle + 1) = handles[k].w_c.transpose();
  }
  return c;
}

// u_bem = -W u_bar + f at a batch of points of one subdomain.
Eigen::MatrixX3d eval_u_bem(const SubdomainSystem& system, std::span<const Point2> points,
                            std::span<const Handle> handles, const KernelParams& params) {
  const auto m = static_cast<Index>(points.size());
  Eigen::MatrixX3d u = Eigen::MatrixX3d::Zero(m, 3);
  if (handles.empty()) return u;
  const Eigen::MatrixXd u_bar = solve_boundary(system, assemble_rhs(system.elements, handles, params));
  for (Index start = 0; start < m; start += kEvalChunk) {
    const Index len = std::min(kEvalChunk, m - start);
    const auto chunk = points.subspan(static_cast<std::size_t>(start), static_cast<std::size_t>(len));
    const Eigen::MatrixXd w = boundary_weights(system, chunk);
    u.middleRows(start, len) = -w * u_bar;
#pragma omp parallel for schedule(static)
    for (Index i = 0; i < len; ++i)
      u.row(start + i) += eval_f(chunk[static_cast<std::size_t>(i)], handles, params).transpose();
  }
  return u;
}

double loss_sum(const Eigen::MatrixX3d& u_bem, const Rgb& b, const Eigen::MatrixX3d& targets) {
  return 0.5 * ((u_bem.rowwise() + b.transpose()) - targets).squaredNorm();
}

bool handles_valid(std::span<const Handle> handles) {
  for (const auto& h : handles) {
    if (!h.p0.allFinite() || !h.p1.allFinite() || !h.w_d.allFinite() || !h.w_c.allFinite()) return false;
    if (!(h.length() > 1e-12)) return false;
  }
  return true;
}

}  // namespace

void validate(const LMConfig& c) {
  if (c.samples_per_step < 1) throw std::invalid_argument("LMConfig: samples_per_step must be >= 1");
  if (c.spp < 1) throw std::invalid_argument("LMConfig: spp must be >= 1");
  if (c.max_steps < 0) throw std::invalid_argument("LMConfig: max_steps must be >= 0");
  if (c.handle_count0 < 0) throw std::invalid_argument("LMConfig: handle_count0 must be >= 0");
  require_positive(c.eps, "eps");
  require_positive(c.lambda0, "lambda0");
  require_positive(c.lambda_up, "lambda_up");
  require_positive(c.lambda_down, "lambda_down");
  require_positive(c.init_length, "init_length");
  require_positive(c.h_max, "h_max");
  require_positive(c.length_threshold, "length_threshold");
  require_positive(c.length_kappa, "length_kappa");
  require_positive(c.snap_distance, "snap_distance");
  require_positive(c.snap_dir_weight, "snap_dir_weight");
  require_positive(c.snap_kappa, "snap_kappa");
  require_positive(c.lambda_w_d, "lambda_w_d");
  require_positive(c.lambda_w_c, "lambda_w_c");
  require_positive(c.sparsity_t, "sparsity_t");
  require_positive(c.sparsity_eps, "sparsity_eps");
  require_positive(c.prune_threshold, "prune_threshold");
  if (!(c.lambda_w_d > c.lambda_w_c)) throw std::invalid_argument("LMConfig: lambda_w_d must exceed lambda_w_c");
}

std::size_t OptState::handle_count() const {
  std::size_t n = 0;
  for (const auto& h : handles) n += h.size();
  return n;
}

std::vector<std::vector<Handle>> init_handles(const LMConfig& config, std::span<const SubdomainBoundary> boundaries) {
  std::vector<std::vector<Handle>> out(boundaries.size());
  if (config.handle_count0 == 0) return out;
  boost::random::sobol qrng(3);
  qrng.discard(3);  // skip the origin
  auto next = [&] { return std::ldexp(static_cast<double>(qrng()), -64); };
  int placed = 0;
  // Degenerate placements (no containing subdomain, zero length) move on to
  // the next point of the sequence.
  for (long attempt = 0; placed < config.handle_count0; ++attempt) {
    if (attempt > 1000L * config.handle_count0 + 1000)
      throw std::runtime_error("init_handles: could not place handles; do the subdomains cover the image?");
    const Point2 p0(next(), next());
    const double angle = 2.0 * std::numbers::pi * next();
    const auto owner = first_containing(boundaries, p0);
    if (!owner) continue;
    const Vec2 v = config.init_length * Vec2(std::cos(angle), std::sin(angle));
    double lo = 0.0;
    if (first_containing(boundaries, p0 + v) == owner) {
      lo = 1.0;
    } else {
      double hi = 1.0;
      for (int it = 0; it < kShrinkIterations; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (first_containing(boundaries, p0 + mid * v) == owner) lo = mid;
        else hi = mid;
      }
    }
    Handle h;
    h.p0 = p0;
    h.p1 = p0 + lo * v;
    h.owner = *owner;
    if (!(h.length() > 1e-9)) continue;
    out[static_cast<std::size_t>(*owner)].push_back(h);
    ++placed;
  }
  return out;
}

std::vector<NormalEquations> accumulate_normal_equations(std::span<const Rgb> targets,
                                                         std::span<const JacobianBlock> jacobians,
                                                         std::span<const Rgb> u_values,
                                                         std::span<const std::size_t> domains,
                                                         std::span<const std::size_t> handle_counts) {
  const std::size_t m = targets.size();
  if (jacobians.size() != m || u_values.size() != m || domains.size() != m)
    throw std::invalid_argument("accumulate_normal_equations: per-sample inputs differ in length");
  std::vector<NormalEquations> out(handle_counts.size());
  for (std::size_t d = 0; d < handle_counts.size(); ++d) {
    const Index p = ParamLayout::size(handle_counts[d]);
    out[d].H = Eigen::MatrixXd::Zero(p, p);
    out[d].g = Eigen::VectorXd::Zero(p);
  }
  if (m == 0) return out;
  for (std::size_t j = 0; j < m; ++j) {
    auto& ne = out.at(domains[j]);
    if (jacobians[j].cols() != ne.g.size())
      throw std::invalid_argument("accumulate_normal_equations: Jacobian width does not match its subdomain");
    ne.H.noalias() += jacobians[j].transpose() * jacobians[j];
    ne.g.noalias() += jacobians[j].transpose() * (u_values[j] - targets[j]);
  }
  const double inv_m = 1.0 / static_cast<double>(m);
  for (auto& ne : out) {
    ne.H *= inv_m;
    ne.g *= inv_m;
  }
  return out;
}

std::vector<Rgb> update_mean_colors(std::span<const Rgb> targets, std::span<const Rgb> u_bem,
                                    std::span<const std::size_t> domains, std::span<const Rgb> previous,
                                    MeanColorRule rule) {
  if (targets.size() != domains.size() || (rule == MeanColorRule::residual && u_bem.size() != targets.size()))
    throw std::invalid_argument("update_mean_colors: per-sample inputs differ in length");
  std::vector<Rgb> sum(previous.size(), Rgb::Zero());
  std::vector<std::size_t> count(previous.size(), 0);
  for (std::size_t j = 0; j < targets.size(); ++j) {
    const std::size_t d = domains[j];
    sum.at(d) += rule == MeanColorRule::residual ? Rgb(targets[j] - u_bem[j]) : targets[j];
    ++count[d];
  }
  std::vector<Rgb> out(previous.begin(), previous.end());
  for (std::size_t d = 0; d < out.size(); ++d)
    if (count[d] > 0) out[d] = sum[d] / static_cast<double>(count[d]);
  return out;
}

double max_compatibility_violation(const std::vector<std::vector<Handle>>& handles) {
  double worst = 0.0;
  for (const auto& set : handles) worst = std::max(worst, compatibility_residual(set).cwiseAbs().maxCoeff());
  return worst;
}

Optimizer::Optimizer(LMConfig config, std::vector<SubdomainBoundary> boundaries,
                     std::shared_ptr<const SampleOracle> oracle, OptimizeOptions options)
    : config_(config), kernel_(config.kernel()), oracle_(std::move(oracle)), options_(std::move(options)) {
  validate(config_);
  if (!oracle_) throw std::invalid_argument("Optimizer: oracle is null");
  base_ = Reconstruction(std::move(boundaries), kernel_);
  state_.handles.resize(base_.subdomain_count());
  state_.mean_colors.assign(base_.subdomain_count(), Rgb::Zero());
  state_.lambda = config_.lambda0;
}

void Optimizer::initialize() {
  std::vector<SubdomainBoundary> boundaries;
  for (std::size_t d = 0; d < base_.subdomain_count(); ++d) boundaries.push_back(base_.system(d).boundary);
  state_ = OptState{};
  state_.handles = init_handles(config_, boundaries);
  state_.lambda = config_.lambda0;
  state_.mean_colors.assign(base_.subdomain_count(), Rgb::Zero());
  // Zero weights: u_bem vanishes, so b starts at the sample mean per subdomain.
  const Batch batch = draw_batch(0);
  for (std::size_t d = 0; d < base_.subdomain_count(); ++d)
    if (batch.targets[d].rows() > 0) state_.mean_colors[d] = batch.targets[d].colwise().mean().transpose();
  history_.clear();
}

void Optimizer::set_state(OptState state) {
  if (state.handles.size() != base_.subdomain_count() || state.mean_colors.size() != base_.subdomain_count())
    throw std::invalid_argument("Optimizer::set_state: subdomain count mismatch");
  if (!(state.lambda > 0.0)) throw std::invalid_argument("Optimizer::set_state: lambda must be positive");
  for (std::size_t d = 0; d < state.handles.size(); ++d)
    for (auto& h : state.handles[d]) h.owner = static_cast<SubdomainId>(d);
  state_ = std::move(state);
  history_.clear();
}

Optimizer::Batch Optimizer::draw_batch(std::uint64_t stream) const {
  const auto m = static_cast<std::size_t>(config_.samples_per_step);
  std::vector<Point2> points(m);
  std::vector<Rgb> targets(m);
  std::vector<std::size_t> domains(m);
  const auto chunks = static_cast<long>((m + kPointChunk - 1) / kPointChunk);
  bool uncovered = false;
#pragma omp parallel for schedule(dynamic)
  for (long c = 0; c < chunks; ++c) {
    Rng rng = make_stream(options_.seed, stream, static_cast<std::uint64_t>(c));
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    const std::size_t end = std::min(m, static_cast<std::size_t>(c + 1) * kPointChunk);
    for (std::size_t j = static_cast<std::size_t>(c) * kPointChunk; j < end; ++j) {
      const double x = uni(rng);
      const double y = uni(rng);
      points[j] = Point2(x, y);
      const auto d = base_.domain_of(points[j]);
      if (!d) {
        uncovered = true;
        continue;
      }
      domains[j] = static_cast<std::size_t>(*d);
      targets[j] = estimate_target(*oracle_, points[j], config_.spp, rng);
    }
  }
  if (uncovered) throw std::runtime_error("sample point outside every subdomain; the subdomains must cover the image");

  Batch batch;
  batch.total = m;
  const std::size_t n = base_.subdomain_count();
  batch.points.resize(n);
  batch.targets.resize(n);
  std::vector<std::size_t> count(n, 0);
  for (auto d : domains) ++count[d];
  for (std::size_t d = 0; d < n; ++d) {
    batch.points[d].reserve(count[d]);
    batch.targets[d].resize(static_cast<Index>(count[d]), 3);
  }
  for (std::size_t j = 0; j < m; ++j) {
    const std::size_t d = domains[j];
    batch.targets[d].row(static_cast<Index>(batch.points[d].size())) = targets[j].transpose();
    batch.points[d].push_back(points[j]);
  }
  return batch;
}

Optimizer::DomainEvaluation Optimizer::evaluate_domain(std::size_t d, std::span<const Point2> points,
                                                       const Eigen::MatrixX3d& targets,
                                                       std::span<const Handle> handles, const Rgb& mean_color,
                                                       bool with_system) const {
  const SubdomainSystem& system = base_.system(d);
  const auto m = static_cast<Index>(points.size());
  const Index nb = static_cast<Index>(handles.size()) * kBasisPerHandle;
  const Index p = ParamLayout::size(handles.size());
  DomainEvaluation out;
  out.u_bem = Eigen::MatrixX3d::Zero(m, 3);
  if (with_system) {
    out.ne.H = Eigen::MatrixXd::Zero(p, p);
    out.ne.g = Eigen::VectorXd::Zero(p);
  }
  if (handles.empty()) {
    out.loss_sum = loss_sum(out.u_bem, mean_color, targets);
    return out;
  }

  const Eigen::MatrixXd u_basis = solve_boundary(system, assemble_basis_rhs(system.elements, handles, kernel_));
  const Eigen::MatrixX3d coeff = value_map(handles);
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(nb, nb);
  Eigen::MatrixX3d proj = Eigen::MatrixX3d::Zero(nb, 3);
  RowMatrix phi;
  for (Index start = 0; start < m; start += kEvalChunk) {
    const Index len = std::min(kEvalChunk, m - start);
    const auto chunk = points.subspan(static_cast<std::size_t>(start), static_cast<std::size_t>(len));
    phi.resize(len, nb);
#pragma omp parallel for schedule(static)
    for (Index i = 0; i < len; ++i)
      handle_basis_row(chunk[static_cast<std::size_t>(i)], handles, kernel_,
                       std::span<double>(phi.row(i).data(), static_cast<std::size_t>(nb)));
    phi.noalias() -= boundary_weights(system, chunk) * u_basis;
    const Eigen::MatrixX3d u = phi * coeff;
    out.u_bem.middleRows(start, len) = u;
    if (!with_system) continue;
    const Eigen::MatrixX3d r = (u.rowwise() + mean_color.transpose()) - targets.middleRows(start, len);
    gram.selfadjointView<Eigen::Lower>().rankUpdate(phi.transpose());
    proj.noalias() += phi.transpose() * r;
  }
  out.loss_sum = loss_sum(out.u_bem, mean_color, targets);
  if (!with_system) return out;

  gram.triangularView<Eigen::StrictlyUpper>() = gram.transpose();
  for (int c = 0; c < 3; ++c) {
    const Eigen::SparseMatrix<double> s = channel_map(handles, c);
    const Eigen::MatrixXd gs = gram * s;
    out.ne.H.noalias() += Eigen::MatrixXd(s.transpose() * gs);
    out.ne.g.noalias() += s.transpose() * proj.col(c);
  }
  return out;
}

StepMetrics Optimizer::step() {
  const auto t0 = std::chrono::steady_clock::now();
  const int step_index = state_.step + 1;
  const Batch batch = draw_batch(static_cast<std::uint64_t>(step_index));
  const std::size_t n = base_.subdomain_count();
  const double inv_m = 1.0 / static_cast<double>(batch.total);

  StepMetrics metrics;
  metrics.step = step_index;

  std::vector<NormalEquations> systems(n);
  std::vector<Eigen::MatrixXd> bases(n);
  std::vector<std::vector<SnapPair>> pairs(n);
  std::vector<Eigen::MatrixX3d> u_bem(n);
  double loss_before = 0.0;
  for (std::size_t d = 0; d < n; ++d) {
    const auto& handles = state_.handles[d];
    auto eval = evaluate_domain(d, batch.points[d], batch.targets[d], handles, state_.mean_colors[d], true);
    u_bem[d] = std::move(eval.u_bem);
    systems[d] = std::move(eval.ne);
    systems[d].H *= inv_m;
    systems[d].g *= inv_m;
    pairs[d] = find_snap_pairs(handles, config_);
    loss_before += eval.loss_sum * inv_m + regularizer_loss(handles, config_, pairs[d]);
    if (handles.empty()) continue;
    apply_regularizers(systems[d], handles, config_, pairs[d]);
    if (!config_.update_positions) {
      for (std::size_t k = 0; k < handles.size(); ++k)
        for (int g = 0; g < 4; ++g) {
          const Index i = ParamLayout::index(k, g);
          systems[d].H.row(i).setZero();
          systems[d].H.col(i).setZero();
          systems[d].H(i, i) = 1.0;
          systems[d].g(i) = 0.0;
        }
    }
    bases[d] = project_compatibility(systems[d], handles);
  }

  // Propose; a failed factorization raises lambda and retries.
  double lambda = state_.lambda;
  std::vector<Eigen::VectorXd> deltas(n);
  bool solved = false;
  for (int attempt = 0; attempt < kMaxFactorizationRetries && !solved; ++attempt) {
    solved = true;
    for (std::size_t d = 0; d < n && solved; ++d) {
      if (state_.handles[d].empty()) continue;
      auto delta = lm_solve_step(systems[d], lambda, &bases[d]);
      if (!delta) {
        solved = false;
        lambda *= config_.lambda_up;
      } else {
        deltas[d] = std::move(*delta);
      }
    }
  }

  std::vector<std::vector<Handle>> proposal = state_.handles;
  std::vector<Eigen::MatrixX3d> u_new(n);
  double loss_after = std::numeric_limits<double>::infinity();
  if (solved) {
    bool valid = true;
    for (std::size_t d = 0; d < n && valid; ++d) {
      if (proposal[d].empty()) continue;
      unpack_params(pack_params(proposal[d]) + deltas[d], proposal[d]);
      reproject_wc(proposal[d]);
      valid = handles_valid(proposal[d]);
    }
    if (valid) {
      loss_after = 0.0;
      for (std::size_t d = 0; d < n; ++d) {
        u_new[d] = eval_u_bem(base_.system(d), batch.points[d], proposal[d], kernel_);
        loss_after += loss_sum(u_new[d], state_.mean_colors[d], batch.targets[d]) * inv_m +
                      regularizer_loss(proposal[d], config_, pairs[d]);
      }
      if (!std::isfinite(loss_after)) loss_after = std::numeric_limits<double>::infinity();
    }
  }

  const DampingUpdate damping = update_damping(loss_before, loss_after, lambda, config_);
  if (damping.accepted) {
    state_.handles = std::move(proposal);
    u_bem = std::move(u_new);
    state_.last_accepted_loss = loss_after;
  }
  state_.lambda = damping.lambda;

  for (std::size_t d = 0; d < n; ++d) {
    const Index count = batch.targets[d].rows();
    if (count == 0) continue;
    if (config_.mean_color_rule == MeanColorRule::residual)
      state_.mean_colors[d] = (batch.targets[d] - u_bem[d]).colwise().mean().transpose();
    else
      state_.mean_colors[d] = batch.targets[d].colwise().mean().transpose();
  }

  if (config_.sparsity_enabled)
    for (auto& set : state_.handles) set = prune_handles(std::move(set), config_);

  state_.step = step_index;
  metrics.loss_before = loss_before;
  metrics.loss_after = loss_after;
  metrics.lambda = state_.lambda;
  metrics.accepted = damping.accepted;
  metrics.handle_count = state_.handle_count();
  metrics.max_compatibility_violation = max_compatibility_violation(state_.handles);
  if (options_.reference &&
      (step_index % std::max(1, options_.rmse_every) == 0 || step_index == config_.max_steps)) {
    const Image render = reconstruction().render(options_.reference->width);
    metrics.rmse_linear = rmse(render, *options_.reference);
    metrics.rmse_tonemapped = rmse(tone_map(render), tone_map(*options_.reference));
  }
  metrics.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  history_.push_back(metrics);
  if (options_.observer) options_.observer(metrics, state_);
  return metrics;
}

void Optimizer::run() {
  while (state_.step < config_.max_steps) step();
}

Reconstruction Optimizer::reconstruction() const {
  Reconstruction r = base_;
  for (std::size_t d = 0; d < r.subdomain_count(); ++d) {
    r.set_handles(d, state_.handles[d]);
    r.set_mean_color(d, state_.mean_colors[d]);
  }
  return r;
}

OptState optimize(const LMConfig& config, std::vector<SubdomainBoundary> boundaries,
                  std::shared_ptr<const SampleOracle> oracle, OptimizeOptions options,
                  std::vector<StepMetrics>* metrics) {
  Optimizer opt(config, std::move(boundaries), std::move(oracle), std::move(options));
  opt.initialize();
  opt.run();
  if (metrics) *metrics = opt.history();
  return opt.state();
}

}  // namespace bemdc

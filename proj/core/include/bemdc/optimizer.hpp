#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "bemdc/bem_diff.hpp"
#include "bemdc/reconstruction.hpp"
#include "bemdc/target.hpp"

namespace bemdc {

enum class MeanColorRule {
  residual,     // b = mean(target - u_bem)
  sample_mean,  // b = mean(target)
};

struct LMConfig {
  int samples_per_step = 100000;
  int spp = 128;
  double eps = 1e-2;
  double lambda0 = 1e-2;
  double lambda_up = 2.0;
  double lambda_down = 3.0;
  int max_steps = 100;
  int handle_count0 = 500;
  double init_length = 1.0 / 20.0;
  double h_max = 1.0 / 256.0;

  bool update_positions = true;

  bool length_enabled = true;
  double length_threshold = 1.0 / 8.0;
  double length_kappa = 10.0;

  bool snapping_enabled = true;
  double snap_distance = 1.0 / 50.0;
  double snap_dir_weight = 0.5;
  double snap_kappa = 10.0;

  bool sparsity_enabled = false;
  double lambda_w_d = 1e-2;
  double lambda_w_c = 1e-3;
  double sparsity_t = 0.1;
  double sparsity_eps = 1e-4;
  double prune_threshold = 1e-3;

  MeanColorRule mean_color_rule = MeanColorRule::residual;

  KernelParams kernel() const { return {eps, h_max}; }
};

/// Throws std::invalid_argument on non-positive scalars or lambda_w_d <= lambda_w_c.
void validate(const LMConfig& config);

/// Per-subdomain Gauss-Newton system over that subdomain's handle parameters.
struct NormalEquations {
  Eigen::MatrixXd H;
  Eigen::VectorXd g;
};

struct OptState {
  std::vector<std::vector<Handle>> handles;  // per subdomain
  std::vector<Rgb> mean_colors;              // per subdomain
  double lambda = 1e-2;
  int step = 0;
  std::optional<double> last_accepted_loss;

  std::size_t handle_count() const;
};

struct StepMetrics {
  int step = 0;
  double loss_before = 0.0;
  double loss_after = 0.0;
  double lambda = 0.0;  // damping after the update
  bool accepted = false;
  std::size_t handle_count = 0;
  double max_compatibility_violation = 0.0;
  std::optional<double> rmse_linear;
  std::optional<double> rmse_tonemapped;
  double wall_ms = 0.0;
};

/// Quasi-random initial handles with zero weights, grouped by owning subdomain.
std::vector<std::vector<Handle>> init_handles(const LMConfig& config, std::span<const SubdomainBoundary> boundaries);

/// H_d = (1/M) sum J^T J and g_d = (1/M) sum J^T (u - target) over the samples of
/// each subdomain d, M being the total sample count. `jacobians[j]` has the
/// parameter count of the subdomain `domains[j]`.
std::vector<NormalEquations> accumulate_normal_equations(std::span<const Rgb> targets,
                                                         std::span<const JacobianBlock> jacobians,
                                                         std::span<const Rgb> u_values,
                                                         std::span<const std::size_t> domains,
                                                         std::span<const std::size_t> handle_counts);

/// Endpoint pair pulled together by the snapping term.
struct SnapPair {
  std::size_t handle_a = 0;
  int end_a = 0;  // 0 = p0, 1 = p1
  std::size_t handle_b = 0;
  int end_b = 0;
};

/// Mutually minimal snapping pairs between endpoints of distinct handles.
std::vector<SnapPair> find_snap_pairs(std::span<const Handle> handles, const LMConfig& config);

/// Sum of the enabled regularizer losses.
double regularizer_loss(std::span<const Handle> handles, const LMConfig& config, std::span<const SnapPair> pairs);

void apply_regularizers(NormalEquations& ne, std::span<const Handle> handles, const LMConfig& config,
                        std::span<const SnapPair> pairs);
void apply_regularizers(NormalEquations& ne, std::span<const Handle> handles, const LMConfig& config);

/// Compatibility constraint direction of one channel: length_k at each w_c slot.
Eigen::VectorXd compatibility_direction(std::span<const Handle> handles, int channel);

/// H <- P H P, g <- P g with P = I - V V^T projecting out the three
/// compatibility directions. Returns V (orthonormal columns; none when there
/// are no handles).
Eigen::MatrixXd project_compatibility(NormalEquations& ne, std::span<const Handle> handles);

/// Dense projector I - V V^T.
Eigen::MatrixXd projector_from_basis(const Eigen::MatrixXd& v, Eigen::Index size);

/// delta = -(lambda D + H)^-1 g with D = diag(H), zero entries replaced by 1.
/// With a constraint basis V, D is replaced by P D P + (I - P). Returns
/// nullopt when the Cholesky factorization fails.
std::optional<Eigen::VectorXd> lm_solve_step(const NormalEquations& ne, double lambda,
                                             const Eigen::MatrixXd* constraint_basis = nullptr);

struct DampingUpdate {
  bool accepted = false;
  double lambda = 0.0;
};
/// Strict decrease accepts and divides lambda by lambda_down; anything else
/// rejects and multiplies it by lambda_up.
DampingUpdate update_damping(double loss_old, double loss_new, double lambda, const LMConfig& config);

/// b per subdomain from samples: mean(target - u_bem) (or mean(target)).
/// Subdomains without samples keep `previous`.
std::vector<Rgb> update_mean_colors(std::span<const Rgb> targets, std::span<const Rgb> u_bem,
                                    std::span<const std::size_t> domains, std::span<const Rgb> previous,
                                    MeanColorRule rule = MeanColorRule::residual);

/// Removes handles whose w_d and w_c norms are both below prune_threshold,
/// then reprojects w_c. No-op unless sparsity is enabled.
std::vector<Handle> prune_handles(std::vector<Handle> handles, const LMConfig& config);

struct OptimizeOptions {
  std::uint64_t seed = 1;
  /// Reference for RMSE metrics (linear values). Skipped when empty.
  std::optional<Image> reference;
  int rmse_every = 5;
  /// Called after every step with the metrics and the post-step state.
  std::function<void(const StepMetrics&, const OptState&)> observer;
};

/// Stochastic Levenberg-Marquardt fit of handle sets to an oracle.
class Optimizer {
 public:
  Optimizer(LMConfig config, std::vector<SubdomainBoundary> boundaries, std::shared_ptr<const SampleOracle> oracle,
            OptimizeOptions options = {});

  /// Places the initial handles and estimates the initial mean colors.
  void initialize();
  /// Starts from an explicit state instead of initialize().
  void set_state(OptState state);

  StepMetrics step();
  void run();

  const OptState& state() const { return state_; }
  const LMConfig& config() const { return config_; }
  const std::vector<StepMetrics>& history() const { return history_; }

  /// Reconstruction of the current state.
  Reconstruction reconstruction() const;

  /// Fast-path normal equations for subdomain d at the given samples, plus
  /// the data loss sum and u_bem (without mean color). Exposed for tests.
  struct DomainEvaluation {
    NormalEquations ne;
    double loss_sum = 0.0;
    Eigen::MatrixX3d u_bem;
  };
  DomainEvaluation evaluate_domain(std::size_t d, std::span<const Point2> points, const Eigen::MatrixX3d& targets,
                                   std::span<const Handle> handles, const Rgb& mean_color, bool with_system) const;

 private:
  struct Batch {
    std::vector<std::vector<Point2>> points;  // per subdomain
    std::vector<Eigen::MatrixX3d> targets;    // per subdomain
    std::size_t total = 0;
  };
  Batch draw_batch(std::uint64_t stream) const;

  LMConfig config_;
  KernelParams kernel_;
  Reconstruction base_;
  std::shared_ptr<const SampleOracle> oracle_;
  OptimizeOptions options_;
  OptState state_;
  std::vector<StepMetrics> history_;
};

/// Convenience wrapper: initialize then run max_steps steps.
OptState optimize(const LMConfig& config, std::vector<SubdomainBoundary> boundaries,
                  std::shared_ptr<const SampleOracle> oracle, OptimizeOptions options = {},
                  std::vector<StepMetrics>* metrics = nullptr);

/// Max over subdomains and channels of |sum_k length_k w_c,k|.
double max_compatibility_violation(const std::vector<std::vector<Handle>>& handles);

}  // namespace bemdc

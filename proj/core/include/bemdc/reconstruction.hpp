#pragma once

#include <optional>
#include <span>
#include <vector>

#include "bemdc/bem_forward.hpp"
#include "bemdc/image_io.hpp"

namespace bemdc {

/// Diffusion-curve image over a set of priority-ordered subdomains: one
/// factorized boundary system, handle set, mean color and boundary solution
/// per subdomain.
class Reconstruction {
 public:
  Reconstruction() = default;
  /// Discretizes and factorizes every subdomain once. Subdomain ids are
  /// reassigned to their index in `boundaries`.
  Reconstruction(std::vector<SubdomainBoundary> boundaries, const KernelParams& params);

  std::size_t subdomain_count() const { return systems_.size(); }
  const KernelParams& params() const { return params_; }

  const SubdomainSystem& system(std::size_t i) const { return systems_.at(i); }
  const std::vector<Handle>& handles(std::size_t i) const { return handles_.at(i); }
  const Eigen::MatrixXd& boundary_values(std::size_t i) const { return u_bar_.at(i); }
  const Rgb& mean_color(std::size_t i) const { return systems_.at(i).mean_color; }
  std::size_t handle_count() const;

  /// Replaces the handles of subdomain i and re-solves its boundary values.
  void set_handles(std::size_t i, std::vector<Handle> handles);
  void set_mean_color(std::size_t i, const Rgb& color) { systems_.at(i).mean_color = color; }

  /// First subdomain (in priority order) containing x, if any.
  std::optional<SubdomainId> domain_of(const Point2& x) const;

  /// Reconstructed color at x in subdomain i.
  Rgb eval_in(std::size_t i, const Point2& x) const;
  /// Reconstructed color at x in its own subdomain. Throws if x is in none.
  Rgb eval(const Point2& x) const;

  /// Reconstruction without mean color for a batch of points of one subdomain.
  Eigen::MatrixX3d eval_without_mean(std::size_t i, std::span<const Point2> xs) const;

  /// Linear-space raster at the pixel centers of a res x res grid.
  Image render(int resolution) const;

 private:
  KernelParams params_;
  std::vector<SubdomainSystem> systems_;
  std::vector<std::vector<Handle>> handles_;
  std::vector<Eigen::MatrixXd> u_bar_;
};

/// First polygon in `boundaries` containing x.
std::optional<SubdomainId> first_containing(std::span<const SubdomainBoundary> boundaries, const Point2& x);

}  // namespace bemdc

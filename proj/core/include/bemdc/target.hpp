#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "bemdc/bem_forward.hpp"
#include "bemdc/image_io.hpp"

namespace bemdc {

using Rng = std::mt19937_64;

/// Independent random stream keyed by (seed, a, b, c).
Rng make_stream(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0);

// Per-subdomain shading models. `sigma` is the standard deviation of the
// zero-mean Gaussian noise added to every sample.

struct ConstantShading {
  Rgb albedo = Rgb::Zero();
  double sigma = 0.0;
};

/// base + x * grad_x + y * grad_y.
struct LinearShading {
  Rgb base = Rgb::Zero();
  Rgb grad_x = Rgb::Zero();
  Rgb grad_y = Rgb::Zero();
  double sigma = 0.0;
};

/// base + amplitude * exp(-|x - center|^2 / (2 radius^2)).
struct BlobShading {
  Rgb base = Rgb::Zero();
  Rgb amplitude = Rgb::Zero();
  Point2 center = Point2::Zero();
  double radius = 0.1;
  double sigma = 0.0;
};

/// Linear raster stretched over the unit image, bilinearly interpolated.
struct RasterShading {
  std::shared_ptr<const Image> image;
  std::string path;
  double sigma = 0.0;
};

/// Horizontal disk light above the image plane (z = 0).
struct DiskLight {
  Point2 center = Point2(0.5, 0.5);
  double radius = 0.1;
  double height = 1.0;
};

/// Opaque half-plane at z = height covering {q : (q - point) . normal > 0}.
struct HalfPlaneOccluder {
  double height = 0.5;
  Point2 point = Point2::Zero();
  Vec2 normal = Vec2(1.0, 0.0);
};

/// albedo times the visible fraction of the disk light. Each sample traces
/// one ray toward a uniformly chosen light point, so its noise is Bernoulli.
struct SoftShadowShading {
  Rgb albedo = Rgb::Ones();
  DiskLight light;
  std::vector<HalfPlaneOccluder> occluders;
};

/// Known handle configuration rendered through the forward solver.
struct DiffusionCurveShading {
  Rgb mean_color = Rgb::Zero();
  std::vector<Handle> handles;
  double sigma = 0.0;
};

using Shading = std::variant<ConstantShading, LinearShading, BlobShading, RasterShading, SoftShadowShading,
                             DiffusionCurveShading>;

struct SceneSubdomain {
  std::string name;
  SubdomainBoundary boundary;
  Shading shading;
};

/// Priority-ordered subdomains: a point belongs to the first polygon that
/// contains it. Every point of the unit image must be covered.
struct SceneSpec {
  std::vector<SceneSubdomain> subdomains;
  KernelParams kernel;

  std::vector<SubdomainBoundary> boundaries() const;
};

/// Throws std::invalid_argument on invalid polygons, uncovered image points
/// or inconsistent shading parameters. Reassigns ids to priority indices.
void validate(SceneSpec& scene);

std::optional<SubdomainId> domain_of(const Point2& x, const SceneSpec& scene);

/// Fraction of the disk light visible from image point x.
double soft_shadow_visibility(const SoftShadowShading& shading, const Point2& x);
/// One Bernoulli visibility sample (0 or 1).
double soft_shadow_visibility_sample(const SoftShadowShading& shading, const Point2& x, Rng& rng);

/// Noisy renderer stand-in. E[sample(x)] equals the target image at x.
class SampleOracle {
 public:
  virtual ~SampleOracle() = default;

  virtual Rgb sample(const Point2& x, Rng& rng) const = 0;
  /// Average of spp samples. Oracles with additive noise evaluate the noise-free value once.
  virtual Rgb sample_mean(const Point2& x, int spp, Rng& rng) const;
  virtual std::optional<Rgb> true_value(const Point2&) const { return std::nullopt; }
  virtual std::optional<SubdomainId> domain_of(const Point2& x) const = 0;
};

/// Oracle defined by a scene's per-subdomain shading.
class SceneOracle : public SampleOracle {
 public:
  /// Builds forward systems for diffusion-curve shaded subdomains.
  explicit SceneOracle(SceneSpec scene);

  Rgb sample(const Point2& x, Rng& rng) const override;
  Rgb sample_mean(const Point2& x, int spp, Rng& rng) const override;
  std::optional<Rgb> true_value(const Point2& x) const override;
  std::optional<SubdomainId> domain_of(const Point2& x) const override;

  const SceneSpec& scene() const { return scene_; }

 private:
  struct CurveState {
    SubdomainSystem system;
    Eigen::MatrixXd u_bar;
    std::vector<Handle> handles;
  };

  Rgb noise_free(std::size_t domain, const Point2& x) const;
  double noise_sigma(std::size_t domain) const;

  SceneSpec scene_;
  std::vector<std::unique_ptr<CurveState>> curves_;
};

/// Returns the noise-free target as every sample.
class NoiseFreeOracle : public SampleOracle {
 public:
  explicit NoiseFreeOracle(std::shared_ptr<const SampleOracle> inner) : inner_(std::move(inner)) {}

  Rgb sample(const Point2& x, Rng&) const override;
  Rgb sample_mean(const Point2& x, int, Rng&) const override;
  std::optional<Rgb> true_value(const Point2& x) const override { return inner_->true_value(x); }
  std::optional<SubdomainId> domain_of(const Point2& x) const override { return inner_->domain_of(x); }

 private:
  std::shared_ptr<const SampleOracle> inner_;
};

/// Mean of spp samples, clamped per channel to [0, 1] after averaging.
Rgb estimate_target(const SampleOracle& oracle, const Point2& x, int spp, Rng& rng);

/// Noise-free target at the pixel centers of a res x res grid. Throws if the
/// oracle has no true value.
Image true_image(const SampleOracle& oracle, int resolution);

}  // namespace bemdc

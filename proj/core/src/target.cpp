#include "bemdc/target.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace bemdc {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

// Coverage of the unit image is checked on this many points per side.
constexpr int kCoverageGrid = 65;
// Angular resolution of the multi-occluder visibility integral.
constexpr int kVisibilityAngles = 4096;

// Light-plane line for one occluder: the light point l is blocked iff l.n > t.
double blocking_threshold(const DiskLight& light, const HalfPlaneOccluder& o, const Point2& x) {
  return x.dot(o.normal) - (light.height / o.height) * (x - o.point).dot(o.normal);
}

double cap_fraction(double offset, double radius) {
  if (offset >= radius) return 0.0;
  if (offset <= -radius) return 1.0;
  const double area = radius * radius * std::acos(offset / radius) - offset * std::sqrt(radius * radius - offset * offset);
  return area / (std::numbers::pi * radius * radius);
}

}  // namespace

Rng make_stream(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(a),    static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b),    static_cast<std::uint32_t>(b >> 32),
                    static_cast<std::uint32_t>(c),    static_cast<std::uint32_t>(c >> 32)};
  return Rng(seq);
}

std::vector<SubdomainBoundary> SceneSpec::boundaries() const {
  std::vector<SubdomainBoundary> out;
  out.reserve(subdomains.size());
  for (const auto& s : subdomains) out.push_back(s.boundary);
  return out;
}

void validate(SceneSpec& scene) {
  if (scene.subdomains.empty()) throw std::invalid_argument("scene has no subdomains");
  if (!(scene.kernel.epsilon > 0.0) || !(scene.kernel.h_max > 0.0))
    throw std::invalid_argument("scene kernel: epsilon and h_max must be positive");
  for (std::size_t i = 0; i < scene.subdomains.size(); ++i) {
    auto& sub = scene.subdomains[i];
    sub.boundary.id = static_cast<SubdomainId>(i);
    validate(sub.boundary);
    std::visit(Overloaded{
                   [&](const SoftShadowShading& s) {
                     if (!(s.light.radius > 0.0) || !(s.light.height > 0.0))
                       throw std::invalid_argument(sub.name + ": light radius and height must be positive");
                     for (const auto& o : s.occluders)
                       if (!(o.height > 0.0 && o.height < s.light.height) || std::abs(o.normal.norm() - 1.0) > 1e-9)
                         throw std::invalid_argument(sub.name +
                                                     ": occluders need 0 < height < light height and a unit normal");
                   },
                   [&](const RasterShading& s) {
                     if (!s.image || s.image->width < 1 || s.image->height < 1)
                       throw std::invalid_argument(sub.name + ": raster shading without image data");
                   },
                   [&](const DiffusionCurveShading& s) {
                     for (const auto& h : s.handles)
                       if (!(h.length() > 0.0)) throw std::invalid_argument(sub.name + ": zero-length handle");
                   },
                   [](const auto&) {},
               },
               sub.shading);
    const double sigma = std::visit(Overloaded{
                                        [](const SoftShadowShading&) { return 0.0; },
                                        [](const auto& s) { return s.sigma; },
                                    },
                                    sub.shading);
    if (!(sigma >= 0.0) || !std::isfinite(sigma))
      throw std::invalid_argument(sub.name + ": noise sigma must be finite and non-negative");
  }
  for (int j = 0; j < kCoverageGrid; ++j)
    for (int i = 0; i < kCoverageGrid; ++i) {
      const Point2 p(static_cast<double>(i) / (kCoverageGrid - 1), static_cast<double>(j) / (kCoverageGrid - 1));
      if (!domain_of(p, scene))
        throw std::invalid_argument("scene does not cover the image at (" + std::to_string(p.x()) + ", " +
                                    std::to_string(p.y()) + "); add a full-frame background subdomain");
    }
}

std::optional<SubdomainId> domain_of(const Point2& x, const SceneSpec& scene) {
  for (std::size_t i = 0; i < scene.subdomains.size(); ++i)
    if (point_in_subdomain(x, scene.subdomains[i].boundary)) return static_cast<SubdomainId>(i);
  return std::nullopt;
}

double soft_shadow_visibility(const SoftShadowShading& shading, const Point2& x) {
  const auto& light = shading.light;
  if (shading.occluders.empty()) return 1.0;
  if (shading.occluders.size() == 1) {
    const auto& o = shading.occluders.front();
    const double offset = blocking_threshold(light, o, x) - light.center.dot(o.normal);
    return 1.0 - cap_fraction(offset, light.radius);
  }
  // Union of half-planes: per light direction the blocked radii form
  // [0, upper] U [lower, R]; integrate rho d rho exactly, angles by midpoint rule.
  const double r = light.radius;
  double blocked = 0.0;
  for (int k = 0; k < kVisibilityAngles; ++k) {
    const double phi = 2.0 * std::numbers::pi * (k + 0.5) / kVisibilityAngles;
    const Vec2 dir(std::cos(phi), std::sin(phi));
    double lower = std::numeric_limits<double>::infinity();   // blocked for rho >= lower
    double upper = -std::numeric_limits<double>::infinity();  // blocked for rho <= upper
    for (const auto& o : shading.occluders) {
      const double slope = dir.dot(o.normal);
      const double rhs = blocking_threshold(light, o, x) - light.center.dot(o.normal);
      if (slope > 0.0) {
        lower = std::min(lower, rhs / slope);
      } else if (slope < 0.0) {
        upper = std::max(upper, rhs / slope);
      } else if (rhs < 0.0) {
        upper = r;
      }
    }
    const double a = std::clamp(upper, 0.0, r);
    const double b = std::clamp(lower, 0.0, r);
    double measure = 0.5 * a * a;                       // [0, a]
    if (b > a) measure += 0.5 * (r * r - b * b);        // [b, r]
    else measure = 0.5 * r * r;                         // intervals overlap
    blocked += measure;
  }
  blocked /= kVisibilityAngles * 0.5 * r * r;
  return 1.0 - blocked;
}

double soft_shadow_visibility_sample(const SoftShadowShading& shading, const Point2& x, Rng& rng) {
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const auto& light = shading.light;
  const double rho = light.radius * std::sqrt(uni(rng));
  const double phi = 2.0 * std::numbers::pi * uni(rng);
  const Point2 l = light.center + rho * Vec2(std::cos(phi), std::sin(phi));
  for (const auto& o : shading.occluders) {
    const Point2 q = x + (l - x) * (o.height / light.height);
    if ((q - o.point).dot(o.normal) > 0.0) return 0.0;
  }
  return 1.0;
}

Rgb SampleOracle::sample_mean(const Point2& x, int spp, Rng& rng) const {
  Rgb sum = Rgb::Zero();
  for (int k = 0; k < spp; ++k) sum += sample(x, rng);
  return sum / spp;
}

SceneOracle::SceneOracle(SceneSpec scene) : scene_(std::move(scene)) {
  validate(scene_);
  curves_.resize(scene_.subdomains.size());
  for (std::size_t i = 0; i < scene_.subdomains.size(); ++i) {
    auto* dc = std::get_if<DiffusionCurveShading>(&scene_.subdomains[i].shading);
    if (!dc) continue;
    auto state = std::make_unique<CurveState>();
    state->system = SubdomainSystem::build(scene_.subdomains[i].boundary, scene_.kernel.h_max);
    state->system.mean_color = dc->mean_color;
    state->handles = dc->handles;
    for (auto& h : state->handles) h.owner = static_cast<SubdomainId>(i);
    reproject_wc(state->handles);
    dc->handles = state->handles;
    state->u_bar = solve_boundary(state->system, assemble_rhs(state->system.elements, state->handles, scene_.kernel));
    curves_[i] = std::move(state);
  }
}

std::optional<SubdomainId> SceneOracle::domain_of(const Point2& x) const { return bemdc::domain_of(x, scene_); }

double SceneOracle::noise_sigma(std::size_t domain) const {
  return std::visit(Overloaded{
                        [](const SoftShadowShading&) { return 0.0; },
                        [](const auto& s) { return s.sigma; },
                    },
                    scene_.subdomains[domain].shading);
}

Rgb SceneOracle::noise_free(std::size_t domain, const Point2& x) const {
  return std::visit(
      Overloaded{
          [](const ConstantShading& s) -> Rgb { return s.albedo; },
          [&](const LinearShading& s) -> Rgb { return s.base + x.x() * s.grad_x + x.y() * s.grad_y; },
          [&](const BlobShading& s) -> Rgb {
            return s.base + s.amplitude * std::exp(-(x - s.center).squaredNorm() / (2.0 * s.radius * s.radius));
          },
          [&](const RasterShading& s) -> Rgb { return bilinear(*s.image, x); },
          [&](const SoftShadowShading& s) -> Rgb { return s.albedo * soft_shadow_visibility(s, x); },
          [&](const DiffusionCurveShading&) -> Rgb {
            const auto& c = *curves_[domain];
            return eval_solution(x, c.system, c.u_bar, c.handles, scene_.kernel);
          },
      },
      scene_.subdomains[domain].shading);
}

Rgb SceneOracle::sample(const Point2& x, Rng& rng) const {
  const auto d = domain_of(x);
  if (!d) throw std::out_of_range("sample: point outside every subdomain");
  const auto domain = static_cast<std::size_t>(*d);
  if (const auto* s = std::get_if<SoftShadowShading>(&scene_.subdomains[domain].shading))
    return s->albedo * soft_shadow_visibility_sample(*s, x, rng);
  Rgb value = noise_free(domain, x);
  if (const double sigma = noise_sigma(domain); sigma > 0.0) {
    std::normal_distribution<double> noise(0.0, sigma);
    for (int c = 0; c < 3; ++c) value(c) += noise(rng);
  }
  return value;
}

Rgb SceneOracle::sample_mean(const Point2& x, int spp, Rng& rng) const {
  const auto d = domain_of(x);
  if (!d) throw std::out_of_range("sample_mean: point outside every subdomain");
  const auto domain = static_cast<std::size_t>(*d);
  if (std::holds_alternative<SoftShadowShading>(scene_.subdomains[domain].shading))
    return SampleOracle::sample_mean(x, spp, rng);
  Rgb value = noise_free(domain, x);
  if (const double sigma = noise_sigma(domain); sigma > 0.0) {
    std::normal_distribution<double> noise(0.0, sigma);
    Rgb sum = Rgb::Zero();
    for (int k = 0; k < spp; ++k)
      for (int c = 0; c < 3; ++c) sum(c) += noise(rng);
    value += sum / spp;
  }
  return value;
}

std::optional<Rgb> SceneOracle::true_value(const Point2& x) const {
  const auto d = domain_of(x);
  if (!d) return std::nullopt;
  return noise_free(static_cast<std::size_t>(*d), x);
}

Rgb NoiseFreeOracle::sample(const Point2& x, Rng&) const {
  auto v = inner_->true_value(x);
  if (!v) throw std::runtime_error("noise-free oracle: inner oracle has no true value");
  return *v;
}

Rgb NoiseFreeOracle::sample_mean(const Point2& x, int, Rng& rng) const { return sample(x, rng); }

Rgb estimate_target(const SampleOracle& oracle, const Point2& x, int spp, Rng& rng) {
  if (spp < 1) throw std::invalid_argument("estimate_target: spp must be >= 1");
  return oracle.sample_mean(x, spp, rng).cwiseMax(0.0).cwiseMin(1.0);
}

Image true_image(const SampleOracle& oracle, int resolution) {
  Image img(resolution, resolution);
  bool missing = false;
#pragma omp parallel for schedule(static)
  for (int j = 0; j < resolution; ++j)
    for (int i = 0; i < resolution; ++i) {
      const auto v = oracle.true_value(Image::pixel_center(i, j, resolution, resolution));
      if (!v) {
        missing = true;
        continue;
      }
      img.set(i, j, *v);
    }
  if (missing) throw std::runtime_error("true_image: oracle has no noise-free value");
  return img;
}

}  // namespace bemdc

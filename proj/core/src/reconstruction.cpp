#include "bemdc/reconstruction.hpp"

#include <stdexcept>
#include <string>

namespace bemdc {

std::optional<SubdomainId> first_containing(std::span<const SubdomainBoundary> boundaries, const Point2& x) {
  for (std::size_t i = 0; i < boundaries.size(); ++i)
    if (point_in_subdomain(x, boundaries[i])) return static_cast<SubdomainId>(i);
  return std::nullopt;
}

Reconstruction::Reconstruction(std::vector<SubdomainBoundary> boundaries, const KernelParams& params)
    : params_(params) {
  systems_.reserve(boundaries.size());
  for (std::size_t i = 0; i < boundaries.size(); ++i) {
    boundaries[i].id = static_cast<SubdomainId>(i);
    systems_.push_back(SubdomainSystem::build(boundaries[i], params.h_max));
    u_bar_.push_back(Eigen::MatrixXd::Zero(systems_.back().size(), 3));
  }
  handles_.resize(boundaries.size());
}

std::size_t Reconstruction::handle_count() const {
  std::size_t n = 0;
  for (const auto& h : handles_) n += h.size();
  return n;
}

void Reconstruction::set_handles(std::size_t i, std::vector<Handle> handles) {
  for (auto& h : handles) h.owner = static_cast<SubdomainId>(i);
  handles_.at(i) = std::move(handles);
  const auto& sys = systems_.at(i);
  if (handles_[i].empty()) {
    u_bar_[i] = Eigen::MatrixXd::Zero(sys.size(), 3);
  } else {
    u_bar_[i] = solve_boundary(sys, assemble_rhs(sys.elements, handles_[i], params_));
  }
}

std::optional<SubdomainId> Reconstruction::domain_of(const Point2& x) const {
  for (std::size_t i = 0; i < systems_.size(); ++i)
    if (point_in_subdomain(x, systems_[i].boundary)) return static_cast<SubdomainId>(i);
  return std::nullopt;
}

Rgb Reconstruction::eval_in(std::size_t i, const Point2& x) const {
  return eval_solution(x, systems_.at(i), u_bar_.at(i), handles_.at(i), params_);
}

Rgb Reconstruction::eval(const Point2& x) const {
  const auto d = domain_of(x);
  if (!d) throw std::runtime_error("point (" + std::to_string(x.x()) + ", " + std::to_string(x.y()) +
                                   ") lies in no subdomain");
  return eval_in(static_cast<std::size_t>(*d), x);
}

Eigen::MatrixX3d Reconstruction::eval_without_mean(std::size_t i, std::span<const Point2> xs) const {
  const auto& sys = systems_.at(i);
  const auto& handles = handles_.at(i);
  Eigen::MatrixX3d u = -boundary_weights(sys, xs) * u_bar_.at(i);
#pragma omp parallel for schedule(static)
  for (std::size_t k = 0; k < xs.size(); ++k)
    u.row(static_cast<Eigen::Index>(k)) += eval_f(xs[k], handles, params_).transpose();
  return u;
}

Image Reconstruction::render(int resolution) const {
  if (resolution < 1) throw std::invalid_argument("render: resolution must be positive");
  Image image(resolution, resolution);
  std::vector<std::vector<Point2>> points(systems_.size());
  std::vector<std::vector<std::pair<int, int>>> pixels(systems_.size());
  for (int j = 0; j < resolution; ++j)
    for (int i = 0; i < resolution; ++i) {
      const Point2 x = Image::pixel_center(i, j, resolution, resolution);
      const auto d = domain_of(x);
      if (!d) throw std::runtime_error("render: pixel center lies in no subdomain");
      points[*d].push_back(x);
      pixels[*d].emplace_back(i, j);
    }
  constexpr std::size_t kChunk = 4096;
  for (std::size_t s = 0; s < systems_.size(); ++s) {
    for (std::size_t begin = 0; begin < points[s].size(); begin += kChunk) {
      const std::size_t end = std::min(points[s].size(), begin + kChunk);
      const std::span<const Point2> chunk(points[s].data() + begin, end - begin);
      const Eigen::MatrixX3d u = eval_without_mean(s, chunk);
      for (std::size_t k = begin; k < end; ++k)
        image.set(pixels[s][k].first, pixels[s][k].second,
                  u.row(static_cast<Eigen::Index>(k - begin)).transpose() + systems_[s].mean_color);
    }
  }
  return image;
}

}  // namespace bemdc

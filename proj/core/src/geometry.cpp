#include "bemdc/geometry.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace bemdc {

namespace {

// Relative tolerance used for the on-edge test.
constexpr double kEdgeTolerance = 1e-12;

bool on_segment(const Point2& p, const Point2& a, const Point2& b) {
  const Vec2 ab = b - a;
  const Vec2 ap = p - a;
  const double len2 = ab.squaredNorm();
  const double cross = ab.x() * ap.y() - ab.y() * ap.x();
  if (std::abs(cross) > kEdgeTolerance * std::max(1.0, len2)) return false;
  const double t = ab.dot(ap);
  return t >= -kEdgeTolerance * len2 && t <= len2 * (1.0 + kEdgeTolerance);
}

}  // namespace

void validate(const SubdomainBoundary& boundary) {
  const auto& v = boundary.vertices;
  const std::string tag = "subdomain " + std::to_string(boundary.id);
  if (v.size() < 3) throw std::invalid_argument(tag + ": polygon needs at least 3 vertices");
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].allFinite()) throw std::invalid_argument(tag + ": non-finite vertex");
    if ((v[(i + 1) % v.size()] - v[i]).norm() == 0.0)
      throw std::invalid_argument(tag + ": repeated consecutive vertex (degenerate edge)");
  }
  if (signed_area(v) <= 0.0)
    throw std::invalid_argument(tag + ": polygon must be counterclockwise (positive signed area)");
}

double signed_area(std::span<const Point2> polygon) {
  double twice = 0.0;
  for (std::size_t i = 0; i < polygon.size(); ++i) {
    const Point2& p = polygon[i];
    const Point2& q = polygon[(i + 1) % polygon.size()];
    twice += p.x() * q.y() - q.x() * p.y();
  }
  return 0.5 * twice;
}

double perimeter(const SubdomainBoundary& boundary) {
  const auto& v = boundary.vertices;
  double total = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) total += (v[(i + 1) % v.size()] - v[i]).norm();
  return total;
}

Point2 centroid(const SubdomainBoundary& boundary) {
  const auto& v = boundary.vertices;
  double cx = 0.0, cy = 0.0, twice = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const Point2& p = v[i];
    const Point2& q = v[(i + 1) % v.size()];
    const double c = p.x() * q.y() - q.x() * p.y();
    twice += c;
    cx += (p.x() + q.x()) * c;
    cy += (p.y() + q.y()) * c;
  }
  return {cx / (3.0 * twice), cy / (3.0 * twice)};
}

bool point_in_subdomain(const Point2& p, const SubdomainBoundary& boundary) {
  const auto& v = boundary.vertices;
  const std::size_t n = v.size();
  bool inside = false;
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Point2& a = v[j];
    const Point2& b = v[i];
    if (on_segment(p, a, b)) return true;
    if ((b.y() > p.y()) != (a.y() > p.y())) {
      const double x_cross = a.x() + (p.y() - a.y()) * (b.x() - a.x()) / (b.y() - a.y());
      if (p.x() < x_cross) inside = !inside;
    }
  }
  return inside;
}

std::vector<BoundaryElement> discretize_boundary(const SubdomainBoundary& boundary, double h_max) {
  if (!(h_max > 0.0)) throw std::invalid_argument("discretize_boundary: h_max must be positive");
  validate(boundary);
  const auto& v = boundary.vertices;
  std::vector<BoundaryElement> elements;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const Point2& a = v[i];
    const Point2& b = v[(i + 1) % v.size()];
    const double edge_length = (b - a).norm();
    // Guard against round-off pushing an exact multiple of h_max up by one.
    const auto pieces = static_cast<int>(std::max(1.0, std::ceil(edge_length / h_max - 1e-9)));
    const Vec2 tangent = (b - a) / edge_length;
    const Vec2 normal = rot90_cw(tangent);
    for (int k = 0; k < pieces; ++k) {
      BoundaryElement e;
      e.a = a + (b - a) * (static_cast<double>(k) / pieces);
      e.b = (k + 1 == pieces) ? b : Point2(a + (b - a) * (static_cast<double>(k + 1) / pieces));
      e.length = edge_length / pieces;
      e.outward_normal = normal;
      e.owner = boundary.id;
      elements.push_back(e);
    }
  }
  return elements;
}

std::array<QuadNode, 3> gauss3(const Point2& a, const Point2& b) {
  const double length = (b - a).norm();
  std::array<QuadNode, 3> nodes;
  for (int q = 0; q < 3; ++q) {
    nodes[q].point = a + kGauss3Nodes01[q] * (b - a);
    nodes[q].weight = kGauss3Weights01[q] * length;
  }
  return nodes;
}

}  // namespace bemdc

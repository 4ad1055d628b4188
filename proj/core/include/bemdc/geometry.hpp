#pragma once

#include <array>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace bemdc {

/// Position in image space. The image is the unit square [0,1]^2.
using Point2 = Eigen::Vector2d;
using Vec2 = Eigen::Vector2d;
/// Linear-space RGB triple.
using Rgb = Eigen::Vector3d;

/// Index of a subdomain in draw-priority order (0 = highest priority).
using SubdomainId = int;

inline Vec2 rot90_ccw(const Vec2& v) { return {-v.y(), v.x()}; }
inline Vec2 rot90_cw(const Vec2& v) { return {v.y(), -v.x()}; }

/// Closed counterclockwise polygon bounding one subdomain. The closing edge
/// from the last vertex back to the first is implied.
struct SubdomainBoundary {
  SubdomainId id = 0;
  std::vector<Point2> vertices;
};

/// Throws std::invalid_argument unless the polygon has >= 3 vertices, finite
/// coordinates, distinct consecutive vertices and positive signed area.
void validate(const SubdomainBoundary& boundary);

double signed_area(std::span<const Point2> polygon);
double perimeter(const SubdomainBoundary& boundary);
Point2 centroid(const SubdomainBoundary& boundary);

/// Straight piece of a subdomain boundary carrying one constant unknown.
struct BoundaryElement {
  Point2 a;
  Point2 b;
  double length = 0.0;
  Vec2 outward_normal;
  SubdomainId owner = 0;

  Point2 midpoint() const { return 0.5 * (a + b); }
};

struct QuadNode {
  Point2 point;
  double weight = 0.0;  // includes the arc-length factor
};

/// Gauss-Legendre abscissae and weights on [0,1].
inline constexpr std::array<double, 3> kGauss3Nodes01 = {
    0.11270166537925831148, 0.5, 0.88729833462074168852};
inline constexpr std::array<double, 3> kGauss3Weights01 = {
    5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0};

/// True if p lies inside the polygon or on its boundary.
bool point_in_subdomain(const Point2& p, const SubdomainBoundary& boundary);

/// Splits every polygon edge into ceil(edge_length / h_max) equal elements,
/// counterclockwise, with outward normals.
std::vector<BoundaryElement> discretize_boundary(const SubdomainBoundary& boundary, double h_max);

/// 3-point Gauss-Legendre rule mapped onto the segment [a, b].
std::array<QuadNode, 3> gauss3(const Point2& a, const Point2& b);

}  // namespace bemdc

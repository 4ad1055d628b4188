#pragma once

#include <algorithm>
#include <random>

#include "bemdc/bem_forward.hpp"

namespace bemdc::test {

inline SubdomainBoundary unit_square() { return {0, {{0, 0}, {1, 0}, {1, 1}, {0, 1}}}; }

inline double distance_to_segment(const Point2& x, const Point2& a, const Point2& b) {
  const Vec2 d = b - a;
  const double t = std::clamp((x - a).dot(d) / d.squaredNorm(), 0.0, 1.0);
  return (a + t * d - x).norm();
}

/// Random handle inside [0.15, 0.85]^2 whose length stays clear of
/// multiples of h_max (where the quadrature piece count changes).
inline Handle random_handle(std::mt19937_64& rng, double h_max, double max_len = 0.1) {
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  for (;;) {
    Handle h;
    h.p0 = Point2(0.15 + 0.7 * uni(rng), 0.15 + 0.7 * uni(rng));
    const double len = 0.02 + (max_len - 0.02) * uni(rng);
    const double a = 6.283185307179586 * uni(rng);
    h.p1 = h.p0 + len * Vec2(std::cos(a), std::sin(a));
    const double pieces = len / h_max;
    if (std::abs(pieces - std::round(pieces)) < 0.01) continue;
    for (int c = 0; c < 3; ++c) {
      h.w_d(c) = uni(rng) - 0.5;
      h.w_c(c) = 2.0 * uni(rng) - 1.0;
    }
    return h;
  }
}

}  // namespace bemdc::test

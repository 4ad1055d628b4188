#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

#include <doctest.h>

#include <Eigen/QR>

#include "bemdc/bem_forward.hpp"
#include "support.hpp"

using namespace bemdc;

namespace {

const KernelParams kParams{1e-2, 1.0 / 256.0};

const SubdomainSystem& square_system() {
  static const SubdomainSystem s = SubdomainSystem::build(test::unit_square(), kParams.h_max);
  return s;
}

// Dense midpoint-rule reference for the single-layer potential of a handle.
double brute_single_layer(const Point2& x, const Handle& h, double eps, int n) {
  double sum = 0.0;
  const double len = h.length();
  for (int k = 0; k < n; ++k) {
    const Point2 z = h.p0 + (k + 0.5) / n * (h.p1 - h.p0);
    sum += -0.25 * std::numbers::inv_pi * std::log((z - x).squaredNorm() + eps * eps);
  }
  return sum * len / n;
}

// Same for the double layer, -int dG/dn_z dz with the handle normal.
double brute_double_layer(const Point2& x, const Handle& h, double eps, int n) {
  double sum = 0.0;
  const double len = h.length();
  const Vec2 nz = h.normal();
  for (int k = 0; k < n; ++k) {
    const Point2 z = h.p0 + (k + 0.5) / n * (h.p1 - h.p0);
    sum += kInvTwoPi * nz.dot(z - x) / ((z - x).squaredNorm() + eps * eps);
  }
  return sum * len / n;
}

// A = U diag(s) V^T with `zeros` vanishing singular values.
Eigen::MatrixXd rank_deficient(int n, std::mt19937_64& rng, int zeros = 1) {
  std::normal_distribution<double> g;
  Eigen::MatrixXd a(n, n), b(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      a(i, j) = g(rng);
      b(i, j) = g(rng);
    }
  const Eigen::MatrixXd u = Eigen::HouseholderQR<Eigen::MatrixXd>(a).householderQ();
  const Eigen::MatrixXd v = Eigen::HouseholderQR<Eigen::MatrixXd>(b).householderQ();
  Eigen::VectorXd s = Eigen::VectorXd::LinSpaced(n, 2.0, 0.5);
  s.tail(zeros).setZero();
  return u * s.asDiagonal() * v.transpose();
}

}  // namespace

TEST_SUITE("bem_forward") {
  TEST_CASE("system diagonal and nullspace") {
    const auto& s = square_system();
    REQUIRE(s.size() == 1024);
    for (Eigen::Index i = 0; i < s.size(); ++i) CHECK(s.matrix(i, i) == doctest::Approx(1.0 / 512.0));
    CHECK((s.matrix * Eigen::VectorXd::Ones(s.size())).cwiseAbs().maxCoeff() < 1e-4);
    // Two elements on the same straight edge do not interact.
    CHECK(s.matrix(0, 5) == 0.0);
    CHECK(s.matrix(5, 0) == 0.0);
  }

  TEST_CASE("nullspace on a non-convex polygon") {
    const SubdomainBoundary l{0, {{0, 0}, {1, 0}, {1, 0.4}, {0.4, 0.4}, {0.4, 1}, {0, 1}}};
    const auto elements = discretize_boundary(l, 1.0 / 128.0);
    const Eigen::MatrixXd a = assemble_system(elements);
    CHECK((a * Eigen::VectorXd::Ones(a.rows())).cwiseAbs().maxCoeff() < 1e-4);
  }

  TEST_CASE("open element loop is rejected") {
    auto elements = discretize_boundary(test::unit_square(), 0.25);
    elements.pop_back();
    CHECK_THROWS_AS(assemble_system(elements), std::invalid_argument);
  }

  TEST_CASE("pseudo-solver semantics") {
    PseudoSolver id(Eigen::MatrixXd::Identity(3, 3));
    const Eigen::VectorXd e3 = Eigen::Vector3d::UnitZ();
    const Eigen::VectorXd x = id.solve(e3);
    CHECK(std::abs(x.dot(id.discarded_direction())) < 1e-15);
    CHECK(id.solve(Eigen::VectorXd::Zero(3)).isZero(0.0));

    std::mt19937_64 rng(7);
    const Eigen::MatrixXd a = rank_deficient(50, rng);
    PseudoSolver solver(a);
    Eigen::VectorXd v = Eigen::VectorXd::Random(50);
    const Eigen::VectorXd null = solver.discarded_direction();
    const Eigen::VectorXd expected = v - null * null.dot(v);
    CHECK((solver.solve(a * v) - expected).cwiseAbs().maxCoeff() < 1e-8);

    CHECK_THROWS_AS(PseudoSolver{rank_deficient(50, rng, 2)}, std::runtime_error);
    CHECK_THROWS_AS(solver.solve(Eigen::VectorXd::Zero(49)), std::invalid_argument);
  }

  TEST_CASE("solve_boundary on compatible right-hand sides") {
    const auto& s = square_system();
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    Eigen::MatrixXd v(s.size(), 30);
    for (Eigen::Index i = 0; i < v.size(); ++i) v.data()[i] = uni(rng);
    const Eigen::MatrixXd rhs = s.matrix * v;
    const Eigen::MatrixXd u = solve_boundary(s, rhs);
    CHECK((s.matrix * u - rhs).cwiseAbs().maxCoeff() < 1e-8);
    for (int c = 0; c < 30; c += 7) CHECK((solve_boundary(s, rhs.col(c)) - u.col(c)).cwiseAbs().maxCoeff() < 1e-13);
    CHECK(solve_boundary(s, Eigen::MatrixXd::Zero(s.size(), 3)).isZero(0.0));
  }

  TEST_CASE("eval_f against dense quadrature") {
    Handle h{{0.4, 0.5}, {0.6, 0.5}, Rgb::Zero(), Rgb::Ones()};
    const Point2 x(0.5, 0.7);
    const Rgb f = eval_f(x, std::span(&h, 1), kParams);
    const double ref = brute_single_layer(x, h, kParams.epsilon, 100000);
    CHECK(std::abs(f(0) - ref) / std::abs(ref) < 1e-8);

    Handle d{{0.3, 0.35}, {0.42, 0.41}, Rgb(1, 0, 0), Rgb::Zero()};
    for (const Point2& y : {Point2(0.36, 0.5), Point2(0.5, 0.2), Point2(0.37, 0.385)}) {
      const double ref_d = brute_double_layer(y, d, kParams.epsilon, 200000);
      const double got = eval_f(y, std::span(&d, 1), kParams)(0);
      CHECK(std::abs(got - ref_d) <= 1e-6 * std::max(1.0, std::abs(ref_d)));
    }
    CHECK(eval_f(x, {}, kParams).isZero(0.0));
    Handle zero{{0.1, 0.1}, {0.2, 0.2}};
    CHECK(eval_f(x, std::span(&zero, 1), kParams).isZero(0.0));
  }

  TEST_CASE("assemble_rhs linearity and refined quadrature") {
    const auto& s = square_system();
    Handle h{{0.3, 0.15}, {0.45, 0.2}, Rgb(0.3, -0.2, 0.1), Rgb(0.5, 0.2, -0.4)};
    const Eigen::MatrixXd r1 = assemble_rhs(s.elements, std::span(&h, 1), kParams);
    Handle h2 = h;
    h2.w_d *= 2.0;
    h2.w_c *= 2.0;
    CHECK((assemble_rhs(s.elements, std::span(&h2, 1), kParams) - 2.0 * r1).cwiseAbs().maxCoeff() < 1e-14);
    CHECK(assemble_rhs(s.elements, {}, kParams).isZero(0.0));

    // Element on the bottom edge near x = 0.4, about 0.1 from the handle.
    const Eigen::Index i = static_cast<Eigen::Index>(0.4 * 256);
    const auto& e = s.elements[static_cast<std::size_t>(i)];
    Rgb refined = Rgb::Zero();
    for (int k = 0; k < 100; ++k) {
      const Point2 a = e.a + (e.b - e.a) * (k / 100.0);
      const Point2 b = e.a + (e.b - e.a) * ((k + 1) / 100.0);
      for (const auto& q : gauss3(a, b)) refined += q.weight * eval_f(q.point, std::span(&h, 1), kParams);
    }
    CHECK((r1.row(i).transpose() - refined).cwiseAbs().maxCoeff() < 1e-6 * refined.cwiseAbs().maxCoeff());
  }

  TEST_CASE("zero weights reproduce the mean color") {
    SubdomainSystem s = square_system();
    s.mean_color = Rgb(0.5, 0.5, 0.5);
    std::vector<Handle> hs = {{{0.3, 0.3}, {0.4, 0.4}}, {{0.6, 0.2}, {0.7, 0.25}}};
    const Eigen::MatrixXd u = solve_boundary(s, assemble_rhs(s.elements, hs, kParams));
    CHECK(u.isZero(0.0));
    for (const Point2& x : {Point2(0.1, 0.1), Point2(0.5, 0.5), Point2(0.35, 0.35), Point2(0.99, 0.5)})
      CHECK((eval_solution(x, s, u, hs, kParams).array() == 0.5).all());
  }

  TEST_CASE("mean-value property and harmonicity away from handles") {
    const auto& s = square_system();
    std::vector<Handle> hs = {{{0.2, 0.3}, {0.3, 0.25}, Rgb(0.4, -0.2, 0.1), Rgb(1.0, 0.5, -0.5)},
                              {{0.6, 0.7}, {0.7, 0.78}, Rgb(-0.3, 0.2, 0.3), Rgb(-0.8, 0.2, 0.6)}};
    reproject_wc(hs);
    const Eigen::MatrixXd u = solve_boundary(s, assemble_rhs(s.elements, hs, kParams));
    SubdomainSystem sb = s;
    sb.mean_color = Rgb::Constant(0.5);
    for (const Point2& c : {Point2(0.5, 0.45), Point2(0.75, 0.3), Point2(0.3, 0.7)}) {
      Rgb avg = Rgb::Zero();
      for (int k = 0; k < 256; ++k) {
        const double a = 2.0 * std::numbers::pi * k / 256.0;
        avg += eval_solution(c + 0.05 * Vec2(std::cos(a), std::sin(a)), sb, u, hs, kParams);
      }
      avg /= 256.0;
      const Rgb center = eval_solution(c, sb, u, hs, kParams);
      CHECK(((avg - center).cwiseAbs().array() / center.cwiseAbs().array()).maxCoeff() < 1e-3);

      const double h = 1e-3;
      const Rgb lap = (eval_solution(c + Vec2(h, 0), s, u, hs, kParams) + eval_solution(c - Vec2(h, 0), s, u, hs, kParams) +
                       eval_solution(c + Vec2(0, h), s, u, hs, kParams) + eval_solution(c - Vec2(0, h), s, u, hs, kParams) -
                       4.0 * eval_solution(c, s, u, hs, kParams)) /
                      (h * h);
      CHECK(lap.cwiseAbs().maxCoeff() <= 1e-2);
    }
  }

  TEST_CASE("mirror antisymmetry of a centered horizontal handle") {
    const auto& s = square_system();
    std::vector<Handle> hs = {{{0.4, 0.5}, {0.6, 0.5}, Rgb(1, 0, 0), Rgb::Zero()}};
    const Eigen::MatrixXd u = solve_boundary(s, assemble_rhs(s.elements, hs, kParams));
    for (const Point2& x : {Point2(0.5, 0.55), Point2(0.3, 0.6), Point2(0.45, 0.51), Point2(0.8, 0.9)}) {
      const Point2 mirror(x.x(), 1.0 - x.y());
      const double a = eval_solution(x, s, u, hs, kParams)(0);
      const double b = eval_solution(mirror, s, u, hs, kParams)(0);
      CHECK(std::abs(a + b) < 1e-6);
    }
  }

  TEST_CASE("jump sign: the side opposite the normal is higher by w_d") {
    SubdomainSystem s = square_system();
    std::vector<Handle> hs = {{{0.4, 0.5}, {0.6, 0.5}, Rgb(0.4, 0, 0), Rgb::Zero()}};
    const Eigen::MatrixXd u = solve_boundary(s, assemble_rhs(s.elements, hs, kParams));
    const Vec2 n = hs[0].normal();
    const Point2 mid(0.5, 0.5);
    const double d = 3.0 * kParams.epsilon;
    const double away = eval_solution(mid - d * n, s, u, hs, kParams)(0);
    const double into = eval_solution(mid + d * n, s, u, hs, kParams)(0);
    CHECK(away > into);
    // The boundary correction is smooth across the handle; the jump comes from the double layer.
    const double layer = 0.4 * (brute_double_layer(mid - d * n, hs[0], kParams.epsilon, 200000) -
                         brute_double_layer(mid + d * n, hs[0], kParams.epsilon, 200000));
    CHECK(away - into == doctest::Approx(layer).epsilon(0.02));
    // Far from the ends only the kernel smoothing remains: w_d d / sqrt(d^2 + eps^2).
    std::vector<Handle> long_h = {{{0.05, 0.5}, {0.95, 0.5}, Rgb(0.4, 0, 0), Rgb::Zero()}};
    const Eigen::MatrixXd ul = solve_boundary(s, assemble_rhs(s.elements, long_h, kParams));
    const double jump = eval_solution(mid - d * n, s, ul, long_h, kParams)(0) -
                        eval_solution(mid + d * n, s, ul, long_h, kParams)(0);
    CHECK(jump == doctest::Approx(0.4 * d / std::hypot(d, kParams.epsilon)).epsilon(0.03));
  }

  TEST_CASE("handle side colors") {
    SubdomainSystem s = square_system();
    s.mean_color = Rgb::Constant(0.5);
    std::vector<Handle> hs = {{{0.4, 0.5}, {0.6, 0.5}, Rgb(0.2, 0, 0), Rgb::Zero()}};
    const Eigen::MatrixXd u = solve_boundary(s, assemble_rhs(s.elements, hs, kParams));
    const auto [plus, minus] = handle_side_colors(hs[0], s, u, hs, kParams);
    // By antisymmetry the reconstruction at the midpoint is the mean color.
    CHECK((plus - Rgb(0.6, 0.5, 0.5)).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((minus - Rgb(0.4, 0.5, 0.5)).cwiseAbs().maxCoeff() < 1e-9);
    std::mt19937_64 rng(9);
    for (int k = 0; k < 10; ++k) {
      std::vector<Handle> r = {test::random_handle(rng, kParams.h_max)};
      const Eigen::MatrixXd ur = solve_boundary(s, assemble_rhs(s.elements, r, kParams));
      const auto [p, m] = handle_side_colors(r[0], s, ur, r, kParams);
      CHECK((p - m - r[0].w_d).cwiseAbs().maxCoeff() <= 4e-16 * (1.0 + p.cwiseAbs().maxCoeff()));
    }
  }

  TEST_CASE("superposition and factorization reuse") {
    const auto& s = square_system();
    std::mt19937_64 rng(10);
    std::vector<Handle> a = {test::random_handle(rng, kParams.h_max)};
    std::vector<Handle> b = a;
    b[0].w_d = Rgb(0.1, 0.2, 0.3);
    b[0].w_c = Rgb(-0.3, 0.1, 0.2);
    std::vector<Handle> sum = a;
    sum[0].w_d += b[0].w_d;
    sum[0].w_c += b[0].w_c;
    const Point2 x(0.2, 0.9);
    auto value = [&](const std::vector<Handle>& hs) {
      return eval_solution(x, s, solve_boundary(s, assemble_rhs(s.elements, hs, kParams)), hs, kParams);
    };
    CHECK((value(sum) - value(a) - value(b)).cwiseAbs().maxCoeff() < 1e-12);

    const auto before = PseudoSolver::factorization_count();
    for (int k = 0; k < 5; ++k) value({test::random_handle(rng, kParams.h_max)});
    CHECK(PseudoSolver::factorization_count() == before);
  }

  TEST_CASE("compatibility projection") {
    std::vector<Handle> one = {{{0, 0}, {1, 0}, Rgb::Zero(), Rgb(0.3, -1, 2)}};
    reproject_wc(one);
    CHECK(one[0].w_c.isZero(1e-15));
    std::vector<Handle> two = {{{0, 0}, {1, 0}, Rgb::Zero(), Rgb(0.3, 0, 0)}, {{0, 0}, {0, 1}, Rgb::Zero(), Rgb(-0.1, 0, 0)}};
    reproject_wc(two);
    CHECK(two[0].w_c(0) == doctest::Approx(0.2));
    CHECK(two[1].w_c(0) == doctest::Approx(-0.2));
    std::vector<Handle> uneven = {{{0, 0}, {2, 0}, Rgb::Zero(), Rgb(0.3, 0, 0)}, {{0, 0}, {0, 1}, Rgb::Zero(), Rgb(0, 0, 0)}};
    reproject_wc(uneven);
    CHECK(uneven[0].w_c(0) == doctest::Approx(0.06));
    CHECK(uneven[1].w_c(0) == doctest::Approx(-0.12));
    CHECK(std::abs(compatibility_residual(uneven)(0)) < 1e-15);
  }
}

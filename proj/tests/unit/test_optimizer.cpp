#include <cmath>
#include <random>
#include <stdexcept>

#include <doctest.h>

#include <Eigen/Eigenvalues>

#include "bemdc/bem_diff.hpp"
#include "bemdc/optimizer.hpp"
#include "bemdc/target.hpp"
#include "support.hpp"

using namespace bemdc;

namespace {

LMConfig quiet_config() {
  LMConfig c;
  c.length_enabled = false;
  c.snapping_enabled = false;
  c.sparsity_enabled = false;
  return c;
}

NormalEquations zero_system(std::size_t handles) {
  const Eigen::Index p = ParamLayout::size(handles);
  return {Eigen::MatrixXd::Zero(p, p), Eigen::VectorXd::Zero(p)};
}

// Central-difference gradient of the regularizer loss.
Eigen::VectorXd fd_gradient(const std::vector<Handle>& hs, const LMConfig& cfg, std::span<const SnapPair> pairs) {
  const Eigen::VectorXd theta = pack_params(hs);
  Eigen::VectorXd g(theta.size());
  for (Eigen::Index p = 0; p < theta.size(); ++p) {
    const double h = 1e-7;
    auto loss = [&](double d) {
      Eigen::VectorXd t = theta;
      t(p) += d;
      std::vector<Handle> moved(hs.size());
      unpack_params(t, moved);
      return regularizer_loss(moved, cfg, pairs);
    };
    g(p) = (loss(h) - loss(-h)) / (2 * h);
  }
  return g;
}

}  // namespace

TEST_SUITE("optimizer") {
  TEST_CASE("config validation") {
    CHECK_NOTHROW(validate(LMConfig{}));
    LMConfig bad;
    bad.lambda_w_c = bad.lambda_w_d;
    CHECK_THROWS_AS(validate(bad), std::invalid_argument);
    LMConfig neg;
    neg.lambda0 = -1.0;
    CHECK_THROWS_AS(validate(neg), std::invalid_argument);
  }

  TEST_CASE("initial handles") {
    const LMConfig cfg;
    const std::vector<SubdomainBoundary> doms = {
        {0, {{0.2, 0.2}, {0.7, 0.2}, {0.45, 0.6}}},
        {1, {{0, 0}, {1, 0}, {1, 1}, {0, 1}}},
    };
    const auto hs = init_handles(cfg, doms);
    REQUIRE(hs.size() == 2);
    CHECK(hs[0].size() + hs[1].size() == 500);
    CHECK(hs[0].size() > 0);
    for (std::size_t d = 0; d < 2; ++d)
      for (const auto& h : hs[d]) {
        CHECK(first_containing(doms, h.p0) == SubdomainId(d));
        CHECK(first_containing(doms, h.p1) == SubdomainId(d));
        CHECK(h.length() <= 1.0 / 20.0 + 1e-12);
        CHECK(h.w_d.isZero(0.0));
        CHECK(h.w_c.isZero(0.0));
      }
    CHECK(init_handles(cfg, doms)[1][3].p1 == hs[1][3].p1);
  }

  TEST_CASE("normal equation accumulation") {
    JacobianBlock j(3, 10);
    j.setRandom();
    const int m = 10;
    std::vector<Rgb> targets(m), u(m);
    std::vector<JacobianBlock> js(m, j);
    std::vector<std::size_t> doms(m);
    for (int i = 0; i < m; ++i) {
      targets[i] = Rgb::Random();
      u[i] = targets[i];
      doms[i] = i < 4 ? 0 : 1;
    }
    const std::size_t counts[] = {1, 1};
    const auto ne = accumulate_normal_equations(targets, js, u, doms, counts);
    CHECK(ne[0].g.isZero(0.0));
    CHECK((ne[0].H - j.transpose() * j * (4.0 / 10.0)).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((ne[1].H - j.transpose() * j * (6.0 / 10.0)).cwiseAbs().maxCoeff() < 1e-14);

    for (int i = 0; i < m; ++i) js[i].setRandom();
    u[0] += Rgb(0.1, 0.2, 0.3);
    const auto ne2 = accumulate_normal_equations(targets, js, u, doms, counts);
    CHECK((ne2[0].g - js[0].transpose() * Rgb(0.1, 0.2, 0.3) / 10.0).cwiseAbs().maxCoeff() < 1e-15);
    for (const auto& b : ne2) {
      CHECK((b.H - b.H.transpose()).cwiseAbs().maxCoeff() == 0.0);
      CHECK(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(b.H).eigenvalues().minCoeff() >= -1e-10);
    }
  }

  TEST_CASE("regularizers are inactive on short separated handles") {
    LMConfig cfg;
    cfg.sparsity_enabled = false;
    std::vector<Handle> hs = {{{0.1, 0.1}, {0.15, 0.1}}, {{0.6, 0.6}, {0.6, 0.65}}};
    NormalEquations ne = zero_system(2);
    apply_regularizers(ne, hs, cfg);
    CHECK(ne.H.isZero(0.0));
    CHECK(ne.g.isZero(0.0));
    CHECK(regularizer_loss(hs, cfg, find_snap_pairs(hs, cfg)) == 0.0);
  }

  TEST_CASE("length penalty") {
    LMConfig cfg = quiet_config();
    cfg.length_enabled = true;
    const double len = cfg.length_threshold + 0.1;
    const Vec2 dir = Vec2(3, 4).normalized();
    std::vector<Handle> hs = {{{0.2, 0.2}, Point2(0.2, 0.2) + len * dir}};
    NormalEquations ne = zero_system(1);
    apply_regularizers(ne, hs, cfg);
    CHECK(ne.g.segment<2>(ParamLayout::kP1x).dot(dir) == doctest::Approx(cfg.length_kappa * 0.1));
    CHECK(ne.g.segment<2>(ParamLayout::kP0x).dot(dir) == doctest::Approx(-cfg.length_kappa * 0.1));
    CHECK((ne.g - fd_gradient(hs, cfg, {})).cwiseAbs().maxCoeff() < 1e-6);
    CHECK(regularizer_loss(hs, cfg, {}) == doctest::Approx(0.5 * cfg.length_kappa * 0.01));
    CHECK(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(ne.H).eigenvalues().minCoeff() >= -1e-12);
  }

  TEST_CASE("snapping pairs") {
    LMConfig cfg = quiet_config();
    cfg.snapping_enabled = true;
    // p1 of handle 0 is close to p0 of handle 1 and nearly collinear; handle 2 is far away.
    std::vector<Handle> hs = {{{0.1, 0.5}, {0.2, 0.5}}, {{0.205, 0.5}, {0.3, 0.5}}, {{0.7, 0.7}, {0.75, 0.75}}};
    const auto pairs = find_snap_pairs(hs, cfg);
    REQUIRE(pairs.size() == 1);
    const bool forward = pairs[0].handle_a == 0;
    CHECK((forward ? pairs[0].end_a : pairs[0].end_b) == 1);
    CHECK((forward ? pairs[0].handle_b : pairs[0].handle_a) == 1);
    NormalEquations ne = zero_system(3);
    apply_regularizers(ne, hs, cfg, pairs);
    const Vec2 expected = cfg.snap_kappa * (hs[0].p1 - hs[1].p0);
    CHECK((ne.g.segment<2>(ParamLayout::index(0, ParamLayout::kP1x)) - expected).norm() < 1e-12);
    CHECK((ne.g.segment<2>(ParamLayout::index(1, ParamLayout::kP0x)) + expected).norm() < 1e-12);
    CHECK((ne.g - fd_gradient(hs, cfg, pairs)).cwiseAbs().maxCoeff() < 1e-6);

    // Endpoints of the same handle never pair, and each endpoint pairs at most once.
    std::vector<Handle> crowd = {{{0.5, 0.5}, {0.51, 0.5}}, {{0.505, 0.505}, {0.6, 0.6}}, {{0.503, 0.497}, {0.4, 0.3}}};
    const auto cp = find_snap_pairs(crowd, cfg);
    std::vector<int> used(6, 0);
    for (const auto& p : cp) {
      CHECK(p.handle_a != p.handle_b);
      ++used[p.handle_a * 2 + p.end_a];
      ++used[p.handle_b * 2 + p.end_b];
    }
    for (int u : used) CHECK(u <= 1);
  }

  TEST_CASE("sparsity penalty") {
    LMConfig cfg = quiet_config();
    cfg.sparsity_enabled = true;
    std::vector<Handle> zero = {{{0.1, 0.1}, {0.2, 0.1}}};
    NormalEquations ne = zero_system(1);
    apply_regularizers(ne, zero, cfg);
    CHECK(ne.g.isZero(0.0));

    std::mt19937_64 rng(30);
    for (int trial = 0; trial < 5; ++trial) {
      std::vector<Handle> hs = {test::random_handle(rng, cfg.h_max)};
      NormalEquations r = zero_system(1);
      apply_regularizers(r, hs, cfg);
      CHECK((r.g - fd_gradient(hs, cfg, {})).cwiseAbs().maxCoeff() < 1e-7);
      CHECK(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(r.H).eigenvalues().minCoeff() >= -1e-12);
    }

    // Near the origin the exact Hessian is already PSD and must be returned unchanged.
    std::vector<Handle> small = {{{0.1, 0.1}, {0.2, 0.1}, Rgb(1e-3, -5e-4, 2e-4), Rgb(-3e-4, 1e-4, 6e-4)}};
    NormalEquations base = zero_system(1);
    apply_regularizers(base, small, cfg);
    const Eigen::VectorXd theta = pack_params(small);
    for (int slot = ParamLayout::kWd; slot < 10; ++slot) {
      const double h = 1e-9;
      auto grad = [&](double d) {
        Eigen::VectorXd t = theta;
        t(slot) += d;
        std::vector<Handle> moved(1);
        unpack_params(t, moved);
        NormalEquations q = zero_system(1);
        apply_regularizers(q, moved, cfg);
        return q.g;
      };
      const Eigen::VectorXd col = (grad(h) - grad(-h)) / (2 * h);
      CHECK((base.H.col(slot) - col).cwiseAbs().maxCoeff() < 1e-4 * base.H.col(slot).cwiseAbs().maxCoeff());
    }
  }

  TEST_CASE("compatibility projection") {
    std::vector<Handle> hs = {{{0, 0}, {0.1, 0}}, {{0.5, 0.5}, {0.5, 0.6}}};
    NormalEquations ne = zero_system(2);
    ne.H.setIdentity();
    ne.g(ParamLayout::index(0, ParamLayout::kWc)) = 1.0;
    ne.g(ParamLayout::index(0, ParamLayout::kP0x)) = 0.7;
    const Eigen::MatrixXd v = project_compatibility(ne, hs);
    CHECK(ne.g(ParamLayout::index(0, ParamLayout::kWc)) == doctest::Approx(0.5));
    CHECK(ne.g(ParamLayout::index(1, ParamLayout::kWc)) == doctest::Approx(-0.5));
    CHECK(ne.g(ParamLayout::index(0, ParamLayout::kP0x)) == 0.7);
    for (int c = 0; c < 3; ++c) CHECK(std::abs(compatibility_direction(hs, c).dot(ne.g)) < 1e-12);
    const Eigen::MatrixXd p = projector_from_basis(v, ne.g.size());
    CHECK((p * p - p).cwiseAbs().maxCoeff() < 1e-14);

    NormalEquations empty = zero_system(0);
    CHECK(project_compatibility(empty, {}).cols() == 0);
  }

  TEST_CASE("damped step") {
    NormalEquations id{Eigen::MatrixXd::Identity(4, 4), Eigen::VectorXd::Unit(4, 0)};
    const auto newton = lm_solve_step(id, 1e-12);
    REQUIRE(newton);
    CHECK((*newton - (-Eigen::VectorXd::Unit(4, 0))).norm() < 1e-10);
    const auto damped = lm_solve_step(id, 1e8);
    REQUIRE(damped);
    CHECK(damped->norm() < 1e-7);

    // Zero diagonal entries fall back to unit damping.
    NormalEquations sing{Eigen::MatrixXd::Zero(2, 2), Eigen::Vector2d(1.0, -2.0)};
    const auto s = lm_solve_step(sing, 0.5);
    REQUIRE(s);
    CHECK((*s - Eigen::Vector2d(-2.0, 4.0)).norm() < 1e-12);

    // Projected systems keep the step feasible.
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 5; ++trial) {
      std::vector<Handle> hs = {test::random_handle(rng, 1.0 / 256.0), test::random_handle(rng, 1.0 / 256.0),
                                test::random_handle(rng, 1.0 / 256.0)};
      const Eigen::Index p = ParamLayout::size(hs.size());
      Eigen::MatrixXd a = Eigen::MatrixXd::Random(p + 5, p);
      NormalEquations ne{a.transpose() * a, Eigen::VectorXd::Random(p)};
      const Eigen::MatrixXd v = project_compatibility(ne, hs);
      const auto step = lm_solve_step(ne, 0.1, &v);
      REQUIRE(step);
      for (int c = 0; c < 3; ++c) CHECK(std::abs(compatibility_direction(hs, c).dot(*step)) < 1e-10);
    }

    // Tiny damping solves the normal equations.
    Eigen::MatrixXd a = Eigen::MatrixXd::Random(20, 6);
    NormalEquations ls{a.transpose() * a, Eigen::VectorXd::Random(6)};
    const auto exact = lm_solve_step(ls, 1e-14);
    REQUIRE(exact);
    CHECK((ls.H * *exact + ls.g).norm() < 1e-8);
  }

  TEST_CASE("damping update") {
    const LMConfig cfg;
    auto a = update_damping(1.0, 0.9, 0.01, cfg);
    CHECK(a.accepted);
    CHECK(a.lambda == doctest::Approx(0.01 / 3.0));
    auto r = update_damping(1.0, 1.1, 0.01, cfg);
    CHECK_FALSE(r.accepted);
    CHECK(r.lambda == doctest::Approx(0.02));
    auto t = update_damping(1.0, 1.0, 0.01, cfg);
    CHECK_FALSE(t.accepted);
    CHECK(t.lambda == doctest::Approx(0.02));
  }

  TEST_CASE("mean colors") {
    const std::vector<Rgb> prev = {Rgb::Constant(0.1), Rgb::Constant(0.9)};
    const std::vector<Rgb> targets = {Rgb::Constant(0.2), Rgb::Constant(0.4)};
    const std::vector<Rgb> zero = {Rgb::Zero(), Rgb::Zero()};
    const std::vector<std::size_t> doms = {0, 0};
    const auto b = update_mean_colors(targets, zero, doms, prev);
    CHECK((b[0] - Rgb::Constant(0.3)).norm() < 1e-15);
    CHECK(b[1] == prev[1]);
    const std::vector<Rgb> u = {Rgb(0.1, 0.2, 0.3), Rgb(-0.3, 0.0, 0.2)};
    const std::vector<Rgb> shifted = {u[0] + Rgb::Constant(0.7), u[1] + Rgb::Constant(0.7)};
    CHECK((update_mean_colors(shifted, u, doms, prev)[0] - Rgb::Constant(0.7)).norm() < 1e-15);
    const auto literal = update_mean_colors(shifted, u, doms, prev, MeanColorRule::sample_mean);
    CHECK((literal[0] - Rgb(0.6, 0.8, 0.95)).norm() < 1e-15);
  }

  TEST_CASE("pruning") {
    LMConfig cfg;
    cfg.sparsity_enabled = true;
    std::vector<Handle> hs = {{{0, 0}, {0.1, 0}, Rgb::Zero(), Rgb::Zero()},
                              {{0, 0}, {0.1, 0}, Rgb(0.5, 0, 0), Rgb::Zero()},
                              {{0, 0}, {0.2, 0}, Rgb(1e-4, 0, 0), Rgb(0.3, 0, 0)},
                              {{0, 0}, {0.1, 0}, Rgb(1e-4, 0, 0), Rgb(-2e-4, 0, 0)}};
    const auto kept = prune_handles(hs, cfg);
    REQUIRE(kept.size() == 2);
    CHECK(kept[0].w_d(0) == 0.5);
    CHECK(std::abs(compatibility_residual(kept)(0)) < 1e-15);
    cfg.sparsity_enabled = false;
    CHECK(prune_handles(hs, cfg).size() == 4);
  }

  TEST_CASE("zero steps and fixed point") {
    SceneSpec scene;
    scene.kernel = {1e-2, 1.0 / 256.0};
    DiffusionCurveShading dc;
    dc.mean_color = Rgb(0.5, 0.4, 0.3);
    dc.handles = {{{0.3, 0.3}, {0.38, 0.34}, Rgb(0.2, -0.1, 0.1), Rgb(0.3, 0.1, -0.2)},
                  {{0.6, 0.7}, {0.65, 0.62}, Rgb(-0.1, 0.2, 0.0), Rgb(-0.1, 0.3, 0.2)}};
    scene.subdomains.push_back({"all", test::unit_square(), dc});
    validate(scene);
    auto oracle = std::make_shared<NoiseFreeOracle>(std::make_shared<SceneOracle>(scene));

    LMConfig cfg;
    cfg.samples_per_step = 2000;
    cfg.spp = 1;
    cfg.handle_count0 = 16;
    cfg.max_steps = 0;
    std::vector<StepMetrics> metrics;
    Optimizer init(cfg, scene.boundaries(), oracle);
    init.initialize();
    const OptState zero = optimize(cfg, scene.boundaries(), oracle, {}, &metrics);
    CHECK(metrics.empty());
    CHECK(zero.step == 0);
    CHECK(zero.handle_count() == 16);
    CHECK(pack_params(zero.handles[0]) == pack_params(init.state().handles[0]));

    OptState exact;
    exact.handles = {dc.handles};
    reproject_wc(exact.handles[0]);
    exact.mean_colors = {dc.mean_color};
    exact.lambda = cfg.lambda0;
    Optimizer opt(cfg, scene.boundaries(), oracle);
    opt.set_state(exact);
    const StepMetrics m = opt.step();
    CHECK(m.loss_before < 1e-20);
    CHECK((pack_params(opt.state().handles[0]) - pack_params(exact.handles[0])).cwiseAbs().maxCoeff() < 1e-8);
    CHECK((opt.state().mean_colors[0] - dc.mean_color).cwiseAbs().maxCoeff() < 1e-8);
  }

  TEST_CASE("accepted steps lower the loss and keep compatibility") {
    SceneSpec scene;
    scene.kernel = {1e-2, 1.0 / 256.0};
    scene.subdomains.push_back({"all", test::unit_square(), BlobShading{Rgb::Constant(0.2), Rgb(0.5, 0.3, 0.1), {0.5, 0.5}, 0.15, 0.02}});
    validate(scene);
    auto oracle = std::make_shared<SceneOracle>(scene);
    LMConfig cfg;
    cfg.samples_per_step = 3000;
    cfg.spp = 4;
    cfg.handle_count0 = 12;
    cfg.max_steps = 4;
    OptimizeOptions opts;
    opts.seed = 3;
    int accepted = 0;
    opts.observer = [&](const StepMetrics& m, const OptState& s) {
      if (m.accepted) {
        ++accepted;
        CHECK(m.loss_after < m.loss_before);
      }
      CHECK(max_compatibility_violation(s.handles) <= 1e-10);
      CHECK(s.handle_count() == 12);
    };
    std::vector<StepMetrics> metrics;
    optimize(cfg, scene.boundaries(), oracle, opts, &metrics);
    CHECK(metrics.size() == 4);
    CHECK(accepted > 0);

    std::vector<StepMetrics> again;
    opts.observer = nullptr;
    optimize(cfg, scene.boundaries(), oracle, opts, &again);
    for (std::size_t i = 0; i < metrics.size(); ++i) CHECK(metrics[i].loss_after == again[i].loss_after);
  }
}

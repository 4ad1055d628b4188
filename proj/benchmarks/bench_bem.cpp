#include <memory>
#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "bemdc/bem_diff.hpp"
#include "bemdc/optimizer.hpp"
#include "bemdc/target.hpp"

using namespace bemdc;

namespace {

const SubdomainBoundary kSquare{0, {{0, 0}, {1, 0}, {1, 1}, {0, 1}}};

std::vector<Handle> make_handles(int n) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::vector<Handle> hs;
  for (int k = 0; k < n; ++k) {
    Handle h;
    h.p0 = Point2(0.1 + 0.8 * uni(rng), 0.1 + 0.8 * uni(rng));
    h.p1 = h.p0 + 0.05 * Vec2(uni(rng) - 0.5, uni(rng) - 0.5).normalized();
    h.w_d = Rgb(uni(rng), uni(rng), uni(rng)) - Rgb::Constant(0.5);
    h.w_c = Rgb(uni(rng), uni(rng), uni(rng)) - Rgb::Constant(0.5);
    hs.push_back(h);
  }
  reproject_wc(hs);
  return hs;
}

void BM_AssembleSystem(benchmark::State& state) {
  const auto elements = discretize_boundary(kSquare, 1.0 / static_cast<double>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(assemble_system(elements));
  state.SetLabel(std::to_string(elements.size()) + " elements");
}
BENCHMARK(BM_AssembleSystem)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_Factorize(benchmark::State& state) {
  const Eigen::MatrixXd a = assemble_system(discretize_boundary(kSquare, 1.0 / static_cast<double>(state.range(0))));
  for (auto _ : state) benchmark::DoNotOptimize(PseudoSolver(a));
}
BENCHMARK(BM_Factorize)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_BoundaryWeights(benchmark::State& state) {
  const SubdomainSystem s = SubdomainSystem::build(kSquare, 1.0 / 256.0);
  std::vector<Point2> pts;
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  for (int i = 0; i < 1024; ++i) pts.emplace_back(uni(rng), uni(rng));
  for (auto _ : state) benchmark::DoNotOptimize(boundary_weights(s, pts));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(pts.size()));
}
BENCHMARK(BM_BoundaryWeights)->Unit(benchmark::kMillisecond);

void BM_HandleBasisRow(benchmark::State& state) {
  const auto hs = make_handles(static_cast<int>(state.range(0)));
  const KernelParams params{1e-2, 1.0 / 256.0};
  std::vector<double> row(kBasisPerHandle * hs.size());
  const Point2 x(0.37, 0.61);
  for (auto _ : state) {
    handle_basis_row(x, hs, params, row);
    benchmark::DoNotOptimize(row.data());
  }
}
BENCHMARK(BM_HandleBasisRow)->Arg(64)->Arg(500);

void BM_EvaluateDomain(benchmark::State& state) {
  SceneSpec scene;
  scene.subdomains.push_back({"all", kSquare, ConstantShading{Rgb::Constant(0.5), 0.0}});
  validate(scene);
  LMConfig cfg;
  Optimizer opt(cfg, scene.boundaries(), std::make_shared<SceneOracle>(scene));
  const auto hs = make_handles(static_cast<int>(state.range(0)));
  std::vector<Point2> pts;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  for (int i = 0; i < 4096; ++i) pts.emplace_back(uni(rng), uni(rng));
  const Eigen::MatrixX3d targets = Eigen::MatrixX3d::Constant(4096, 3, 0.5);
  for (auto _ : state)
    benchmark::DoNotOptimize(opt.evaluate_domain(0, pts, targets, hs, Rgb::Constant(0.5), true));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(pts.size()));
}
BENCHMARK(BM_EvaluateDomain)->Arg(16)->Arg(64)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();

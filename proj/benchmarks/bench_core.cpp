#include <benchmark/benchmark.h>

#include "affine/forward.hpp"
#include "affine/io.hpp"
#include "affine/wasserstein.hpp"

using namespace affine;

namespace {

AdmissibleParams load(const char* name) {
  AdmissibleParams p = params_from_json(read_text_file(std::string(AFFINE_DATA_DIR) + "/" + name));
  p.validate();
  return p;
}

const ConeElement kU(Matrix((Matrix(2, 2) << 1.0, 0.2, 0.2, 0.5).finished()));

void BM_RiccatiSolve(benchmark::State& state) {
  const AdmissibleParams p = load("mu_n2.json");
  const double tol = std::pow(10.0, -static_cast<double>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(solve_riccati(p, kU, 10.0, tol));
}
BENCHMARK(BM_RiccatiSolve)->Arg(8)->Arg(10)->Arg(12);

void BM_InvariantLaplace(benchmark::State& state) {
  const StationaryLaw law(load("mu_n2.json"), 1e-10);
  for (auto _ : state) benchmark::DoNotOptimize(law.laplace(kU));
}
BENCHMARK(BM_InvariantLaplace);

void BM_SimulatePaths(benchmark::State& state) {
  const AdmissibleParams p = load(state.range(0) == 0 ? "ou_n2.json" : "mu_n2.json");
  auto sim = make_simulator(p, 0.01);
  const ConeElement x0 = ConeElement::identity(2);
  for (auto _ : state) benchmark::DoNotOptimize(simulate_paths(*sim, x0, {0.5, 1.0, 2.0}, 7, 1000, 1));
  state.SetItemsProcessed(state.iterations() * 1000);
  state.SetLabel(to_string(sim->scheme()));
}
BENCHMARK(BM_SimulatePaths)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

Cloud cloud(std::size_t n, std::uint64_t stream) {
  RandomStream rng(99, stream);
  Cloud c(n, Vector(3));
  for (auto& v : c) {
    for (int i = 0; i < 3; ++i) v(i) = rng.normal();
  }
  return c;
}

void BM_ExactAssignment(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Cloud a = cloud(n, 1), b = cloud(n, 2);
  for (auto _ : state) benchmark::DoNotOptimize(wp_exact(a, b, 2.0));
}
BENCHMARK(BM_ExactAssignment)->Arg(256)->Arg(1024)->Unit(benchmark::kMillisecond);

void BM_Sinkhorn(benchmark::State& state) {
  const Cloud a = cloud(512, 1), b = cloud(512, 2);
  for (auto _ : state) benchmark::DoNotOptimize(wp_sinkhorn(a, b, 2.0, 0.5));
}
BENCHMARK(BM_Sinkhorn)->Unit(benchmark::kMillisecond);

PricingModel desk() {
  PricingModel m = pricing_model_from_json(read_text_file(std::string(AFFINE_DATA_DIR) + "/bns_desk.json"));
  m.spec.x_params.validate();
  return m;
}

void BM_FourierEngineBuild(benchmark::State& state) {
  const PricingModel m = desk();
  for (auto _ : state) benchmark::DoNotOptimize(FourierEngine(m, 0.5, 1.5, PricingOptions{}).nodes());
}
BENCHMARK(BM_FourierEngineBuild)->Unit(benchmark::kMillisecond);

void BM_FourierStrikeGrid(benchmark::State& state) {
  const PricingModel m = desk();
  const FourierEngine eng(m, 0.5, 1.5, PricingOptions{});
  const std::vector<double> ks{-0.2, -0.1, 0.0, 0.1, 0.2};
  for (auto _ : state) benchmark::DoNotOptimize(eng.call_point(m.start.x0, Vector::Zero(3), ks));
}
BENCHMARK(BM_FourierStrikeGrid);

}  // namespace
BENCHMARK_MAIN();

#include <benchmark/benchmark.h>

#include <vmstab/discretization.hpp>
#include <vmstab/equilibrium.hpp>
#include <vmstab/kernelproj.hpp>
#include <vmstab/operators.hpp>
#include <vmstab/orbits.hpp>
#include <vmstab/stability.hpp>
#include <vmstab/trajectories.hpp>

using namespace vmstab;

namespace {

Equilibrium magnetic(int n) {
  Profile p = make_profile("damped");
  RadialGrid g = build_grid(n);
  VelocityQuadOptions qo;
  qo.psi_allow = 0.5;
  return solve_equilibrium(p, 0.0, 0.3, g, build_velocity_quad(p, qo));
}

void BM_VelocityQuad(benchmark::State& st) {
  Profile p = make_profile("even_p");
  for (auto _ : st) benchmark::DoNotOptimize(build_velocity_quad(p, 1e-10, 0).size());
}
BENCHMARK(BM_VelocityQuad)->Unit(benchmark::kMillisecond);

void BM_Equilibrium(benchmark::State& st) {
  for (auto _ : st) benchmark::DoNotOptimize(magnetic(static_cast<int>(st.range(0))).residual);
}
BENCHMARK(BM_Equilibrium)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_ExplicitOperators(benchmark::State& st) {
  Equilibrium eq = magnetic(static_cast<int>(st.range(0)));
  OperatorOptions o;
  o.projection = ProjectionMode::Explicit;
  for (auto _ : st) benchmark::DoNotOptimize(assemble_operators(eq, 0.0, o).L.M.sum());
}
BENCHMARK(BM_ExplicitOperators)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_OrbitForms(benchmark::State& st) {
  Equilibrium eq = magnetic(static_cast<int>(st.range(0)));
  double lambda = st.range(1) / 10.0;
  long orbits = 0;
  for (auto _ : st) {
    OrbitForms f = assemble_orbit_forms(eq, lambda);
    orbits = f.orbits;
    benchmark::DoNotOptimize(f.K.sum());
  }
  st.counters["orbits"] = static_cast<double>(orbits);
}
BENCHMARK(BM_OrbitForms)->Args({16, 0})->Args({32, 0})->Args({32, 10})->Unit(benchmark::kMillisecond);

void BM_QLambdaTrajectory(benchmark::State& st) {
  Equilibrium eq = magnetic(32);
  PhaseFn g = [](const PhasePoint& z) { return z.r * z.vt; };
  double lambda = st.range(0) / 100.0;
  for (auto _ : st) benchmark::DoNotOptimize(q_lambda(eq, 1, lambda, g, PhasePoint{0.4, 0.7, -0.5}).value);
}
BENCHMARK(BM_QLambdaTrajectory)->Arg(100)->Arg(10)->Unit(benchmark::kMillisecond);

void BM_QLambdaOrbit(benchmark::State& st) {
  Equilibrium eq = magnetic(32);
  PhaseFn g = [](const PhasePoint& z) { return z.r * z.vt; };
  for (auto _ : st) benchmark::DoNotOptimize(orbit_q(eq, 1, 0.1, {g}, PhasePoint{0.4, 0.7, -0.5})[0]);
}
BENCHMARK(BM_QLambdaOrbit)->Unit(benchmark::kMicrosecond);

void BM_Kappa(benchmark::State& st) {
  Equilibrium eq = magnetic(static_cast<int>(st.range(0)));
  OperatorSet ops = assemble_operators(eq, 0.0);
  for (auto _ : st) benchmark::DoNotOptimize(kappa(ops).kappa);
}
BENCHMARK(BM_Kappa)->Arg(64)->Arg(128)->Arg(256)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();

// Serial reference path versus OpenMP path for the two hot kernels:
// one ensemble step and dynamical-map column propagation.

#include <benchmark/benchmark.h>

#include "tnp/exact.hpp"
#include "tnp/stepper.hpp"

namespace {

tnp::TnpModel decaying_qubit() {
  const auto p = tnp::pauli_ops();
  tnp::TnpModel m;
  m.dim = 2;
  m.hamiltonian.terms = {{tnp::TimeScalar(0.7), p.sx}};
  m.channels = {{tnp::TimeScalar(1.0), p.sigma_minus, "decay"}};
  m.gamma = tnp::GammaSpec::lindblad_plus({{{tnp::TimeScalar(0.5), p.id}}, nullptr});
  return m;
}

void step_kernel(benchmark::State& state, tnp::Execution exec) {
  const tnp::TnpModel model = decaying_qubit();
  tnp::CVector psi(2);
  psi << 0.6, 0.8;
  tnp::RunOptions options;
  options.exec = exec;
  options.merge = false;
  for (auto _ : state) {
    state.PauseTiming();
    tnp::Ensemble e = tnp::sample_initial({{1.0, psi}}, 1, 7, 1);
    // Spread into many singly-occupied members so every member does real work.
    const tnp::Trajectory seed = e.members.front();
    e.members.clear();
    for (int i = 0; i < state.range(0); ++i) e.members.push_back({e.fresh_id(), seed.state, 1, 0});
    e.batch_ref = {static_cast<std::int64_t>(state.range(0))};
    e.n_ref = state.range(0);
    state.ResumeTiming();
    for (int s = 0; s < 10; ++s) tnp::step_ensemble(model, e, 1e-3, options);
    benchmark::DoNotOptimize(e.members.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0) * 10);
}

void map_kernel(benchmark::State& state, tnp::Execution exec) {
  tnp::CountingParams params;
  params.n_max = static_cast<int>(state.range(0));
  const tnp::TnpModel model = tnp::tilted_lindbladian(params, 0.0);
  const tnp::TimeGrid grid(0.0, 0.2, 1e-2);
  for (auto _ : state) {
    auto maps = tnp::propagate_map(model, grid, exec);
    benchmark::DoNotOptimize(maps.back().matrix.data());
  }
}

void BM_StepSerial(benchmark::State& s) { step_kernel(s, tnp::Execution::serial); }
void BM_StepParallel(benchmark::State& s) { step_kernel(s, tnp::Execution::parallel); }
void BM_MapSerial(benchmark::State& s) { map_kernel(s, tnp::Execution::serial); }
void BM_MapParallel(benchmark::State& s) { map_kernel(s, tnp::Execution::parallel); }

} // namespace

BENCHMARK(BM_StepSerial)->Arg(10000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_StepParallel)->Arg(10000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MapSerial)->Arg(8)->Arg(15)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MapParallel)->Arg(8)->Arg(15)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();

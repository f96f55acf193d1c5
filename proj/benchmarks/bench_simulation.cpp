#include <benchmark/benchmark.h>

#include "tsopt/network.hpp"
#include "tsopt/objective.hpp"
#include "tsopt/power_system.hpp"
#include "tsopt/sensitivity.hpp"

using namespace tsopt;

namespace {

const NetworkCase& wscc9() {
  static const NetworkCase net = load_case_file(TSOPT_DATA_DIR "/wscc9.json");
  return net;
}

PssMap pssasp() {
  PssMap pss;
  pss[2] = PssParams::tied(7.5, 10.0, 0.174, 0.05);
  pss[3] = PssParams::tied(7.5, 10.0, 0.174, 0.05);
  return pss;
}

FaultScenario bus9() {
  FaultScenario f;
  f.bus = 9;
  f.t_off = 0.1;
  return f;
}

void BM_PowerFlow(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(solve_power_flow(wscc9()));
}
BENCHMARK(BM_PowerFlow);

void BM_BuildModel(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(build_hybrid_model(wscc9(), bus9(), pssasp()));
}
BENCHMARK(BM_BuildModel);

void BM_Simulate(benchmark::State& state) {
  const PowerSystemModel ps = build_hybrid_model(wscc9(), bus9(), pssasp());
  IntegratorConfig config;
  config.tf = static_cast<double>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(simulate(ps.model, ps.op.x0.values(), ps.schedule, config, ps.op.y0));
}
BENCHMARK(BM_Simulate)->Arg(1)->Arg(10)->Unit(benchmark::kMillisecond);

void BM_SimulateWithSensitivities(benchmark::State& state) {
  const PowerSystemModel ps = build_hybrid_model(wscc9(), bus9(), pssasp());
  IntegratorConfig config;
  config.tf = static_cast<double>(state.range(0));
  const ColumnSet columns = lambda_columns(ps.layout.dims);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        simulate_with_sensitivities(ps.model, ps.op.x0.values(), ps.schedule, config, columns, ps.op.y0));
  }
}
BENCHMARK(BM_SimulateWithSensitivities)->Arg(1)->Arg(10)->Unit(benchmark::kMillisecond);

void BM_ObjectiveGradient(benchmark::State& state) {
  const PowerSystemModel ps = build_hybrid_model(wscc9(), bus9(), pssasp());
  ObjectiveConfig oc;
  oc.speed_rows = ps.layout.speed_rows();
  const TrajectoryObjective obj(ps.model, ps.schedule, IntegratorConfig{}, ps.op.x0.values(), oc, ps.op.y0);
  const Vector lambda = ps.lambda0();
  for (auto _ : state) benchmark::DoNotOptimize(obj.evaluate(lambda, true));
}
BENCHMARK(BM_ObjectiveGradient)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();

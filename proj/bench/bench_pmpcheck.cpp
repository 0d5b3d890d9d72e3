// Serial reference vs OpenMP for the audit kernels.
#include <benchmark/benchmark.h>

#include "delaypmp/costate.hpp"
#include "delaypmp/ddesim.hpp"
#include "delaypmp/io.hpp"
#include "delaypmp/pmpcheck.hpp"

using namespace delaypmp;

namespace {

struct Fixture {
  ProblemSpec spec;
  Process proc;
  MultiplierSet mult;
  std::vector<double> grid;

  explicit Fixture(const char* name) : spec(io::load_problem(std::string(DELAYPMP_PROBLEMS_DIR) + "/" + name + ".json")) {
    const Trajectory u = Trajectory::sampled(spec.S, spec.T, 40, spec.m, [&](double t) { return Vec(Vec::Constant(spec.m, 0.5 * std::sin(4 * t))); },
                                             Interp::PiecewiseConstantLeft);
    proc = make_process(spec, u, spec.initialData, spec.x0, 1e-3);
    mult = costate_solve(spec, proc, 1.0, Vec(-spec.g.gradient(proc.x(spec.S), proc.x(proc.T), proc.T).xT), 1e-3);
    grid = quadrature_grid(spec, proc);
  }
};

Fixture& fixture(int which) {
  static Fixture lq("lq_delay_mixed");
  static Fixture bb("bang_bang_delay");
  return which == 0 ? lq : bb;
}

void BM_pointwise(benchmark::State& state) {
  Fixture& f = fixture(static_cast<int>(state.range(0)));
  const Exec exec = state.range(1) ? Exec::Parallel : Exec::Serial;
  for (auto _ : state) benchmark::DoNotOptimize(pointwise_max_residual(f.spec, f.proc, f.mult, f.grid, exec, 1));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(f.grid.size()));
}

void BM_full_audit(benchmark::State& state) {
  Fixture& f = fixture(static_cast<int>(state.range(0)));
  AuditOptions opt;
  opt.seed = 1;
  opt.exec = state.range(1) ? Exec::Parallel : Exec::Serial;
  for (auto _ : state) benchmark::DoNotOptimize(full_audit(f.spec, f.proc, f.mult, opt));
}

}  // namespace

BENCHMARK(BM_pointwise)->ArgNames({"problem", "parallel"})->ArgsProduct({{0, 1}, {0, 1}})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_full_audit)->ArgNames({"problem", "parallel"})->ArgsProduct({{0, 1}, {0, 1}})->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();

#include <benchmark/benchmark.h>

#include <random>

#include "gridscope/harness.hpp"
#include "gridscope/numeric.hpp"
#include "gridscope/observability.hpp"
#include "gridscope/solvers.hpp"

using namespace gridscope;

namespace {

const std::string kData = GRIDSCOPE_BENCH_DATA_DIR;

struct Fixture {
  Grid grid;
  AdmittanceMatrix Y;
  std::pair<State, State> pair;
  CoupledSpec spec;
};

const Fixture& scenario_a() {
  static const Fixture f = [] {
    const Grid g = apply_scenario(load_grid(kData + "/ieee34.json"), load_scenario(kData + "/scenario_a.json"));
    const AdmittanceMatrix Y = build_admittance(g);
    auto pair = *StateSampler{}.sample(g, Y, 1);
    const CoupledSpec spec = specify(g, Y, pair.first, pair.second);
    return Fixture{g, Y, pair, spec};
  }();
  return f;
}

}  // namespace

static void BM_Jacobians(benchmark::State& state) {
  const auto& f = scenario_a();
  for (auto _ : state) benchmark::DoNotOptimize(jacobians(f.pair.first, f.Y));
}
BENCHMARK(BM_Jacobians);

static void BM_CoupledJacobian(benchmark::State& state) {
  const auto& f = scenario_a();
  for (auto _ : state)
    benchmark::DoNotOptimize(coupled_jacobian(f.grid, f.Y, f.pair.first, f.pair.second, JacobianForm::analysis));
}
BENCHMARK(BM_CoupledJacobian);

static void BM_CheckCriterion(benchmark::State& state) {
  const auto& f = scenario_a();
  for (auto _ : state) benchmark::DoNotOptimize(check_criterion(f.grid));
}
BENCHMARK(BM_CheckCriterion);

static void BM_GenericRank(benchmark::State& state) {
  const auto& f = scenario_a();
  const PatternMatrix pat = coupled_jacobian_pattern(f.grid, 1);
  for (auto _ : state) benchmark::DoNotOptimize(generic_rank(pat, 1, 1));
}
BENCHMARK(BM_GenericRank)->Unit(benchmark::kMillisecond);

static void BM_ConditionNumber(benchmark::State& state) {
  const auto& f = scenario_a();
  const Eigen::MatrixXd J = coupled_jacobian(f.grid, f.Y, f.pair.first, f.pair.second, JacobianForm::analysis).matrix;
  for (auto _ : state) benchmark::DoNotOptimize(condition_number(J));
}
BENCHMARK(BM_ConditionNumber)->Unit(benchmark::kMillisecond);

static void BM_NewtonFlatStart(benchmark::State& state) {
  const auto& f = scenario_a();
  for (auto _ : state) benchmark::DoNotOptimize(solve_cpf_newton(f.grid, f.Y, f.spec));
}
BENCHMARK(BM_NewtonFlatStart)->Unit(benchmark::kMillisecond);

static void BM_SdpCpf(benchmark::State& state) {
  const auto& f = scenario_a();
  for (auto _ : state) benchmark::DoNotOptimize(solve_cpf_sdp(f.grid, f.Y, f.spec));
}
BENCHMARK(BM_SdpCpf)->Unit(benchmark::kMillisecond)->Iterations(3);

static void BM_SdpMinEigen(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  std::mt19937_64 rng(3);
  std::normal_distribution<double> nd;
  Eigen::MatrixXcd a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = sdp::cplx(nd(rng), nd(rng));
  sdp::Problem p;
  const int b = p.add_block(n);
  p.objective[b] = sdp::SparseHermitian::from_dense(0.5 * (a + a.adjoint()));
  sdp::SparseHermitian id(n);
  for (int i = 0; i < n; ++i) id.add(i, i, 1.0);
  sdp::Constraint c;
  c.blocks.emplace_back(b, id);
  c.rhs = 1.0;
  p.constraints.push_back(c);
  for (auto _ : state) benchmark::DoNotOptimize(sdp::solve(p));
}
BENCHMARK(BM_SdpMinEigen)->Arg(8)->Arg(32)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();

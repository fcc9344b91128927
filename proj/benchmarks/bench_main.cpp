#include <benchmark/benchmark.h>

#include <cmath>

#include "fracinterp/kfunctional.hpp"
#include "fracinterp/mesh.hpp"
#include "fracinterp/model.hpp"
#include "fracinterp/partition.hpp"
#include "fracinterp/seminorms.hpp"
#include "fracinterp/snowflake.hpp"

using namespace fracinterp;

namespace {

const std::shared_ptr<const DomainModel>& slit() {
  static const auto m = polygon_model(Domain(slit_domain()), "slit");
  return m;
}

void BM_BuildSnowflake(benchmark::State& state) {
  const SnowflakePlan plan = uniform_plan(0.3, SnowflakeRule::bump, static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(build_snowflake(plan));
}
BENCHMARK(BM_BuildSnowflake)->DenseRange(2, 6, 2)->Unit(benchmark::kMillisecond);

void BM_TriangulateSlit(benchmark::State& state) {
  const Domain d(slit_domain());
  const double ell = std::ldexp(1.0, -static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(triangulate(d, ell));
}
BENCHMARK(BM_TriangulateSlit)->DenseRange(3, 7, 2)->Unit(benchmark::kMillisecond);

void BM_TriangulatePentagon(benchmark::State& state) {
  Chain c;
  for (int k = 0; k < 5; ++k) c.push_back({std::cos(0.3 + 2 * M_PI * k / 5), std::sin(0.3 + 2 * M_PI * k / 5)});
  const Domain d(DomainSpec{c, {}, {}});
  const double ell = std::ldexp(1.0, -static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(triangulate(d, ell));
}
BENCHMARK(BM_TriangulatePentagon)->DenseRange(3, 6, 1)->Unit(benchmark::kMillisecond);

void BM_SnowflakePartition(benchmark::State& state) {
  const SnowflakePlan plan = uniform_plan(0.3, SnowflakeRule::bump, 4);
  for (auto _ : state) benchmark::DoNotOptimize(snowflake_partition(plan, 0.09));
}
BENCHMARK(BM_SnowflakePartition)->Unit(benchmark::kMillisecond);

void BM_BoundaryDistance(benchmark::State& state) {
  const Domain d(slit_domain());
  double x = -0.9;
  for (auto _ : state) {
    benchmark::DoNotOptimize(d.distance_to_boundary({x, 0.37}));
    x = x > 0.9 ? -0.9 : x + 1e-3;
  }
}
BENCHMARK(BM_BoundaryDistance);

void BM_GagliardoRestricted(benchmark::State& state) {
  const FieldFn f = FieldFn::slit_angle();
  const Exponents e{0.8, 1.5};
  const auto cells = slit()->cover(std::ldexp(1.0, -static_cast<int>(state.range(0))));
  SeminormOptions opt;
  opt.threads = 1;
  for (auto _ : state)
    benchmark::DoNotOptimize(gagliardo_powers(f, std::span(&e, 1), slit()->domain(), cells, true, opt));
}
BENCHMARK(BM_GagliardoRestricted)->DenseRange(2, 4, 1)->Unit(benchmark::kMillisecond);

void BM_GagliardoFull(benchmark::State& state) {
  const FieldFn f = FieldFn::slit_angle();
  const Exponents e{0.8, 1.5};
  const auto cells = slit()->cover(std::ldexp(1.0, -static_cast<int>(state.range(0))));
  SeminormOptions opt;
  opt.threads = 1;
  for (auto _ : state)
    benchmark::DoNotOptimize(gagliardo_powers(f, std::span(&e, 1), slit()->domain(), cells, false, opt));
}
BENCHMARK(BM_GagliardoFull)->DenseRange(2, 4, 1)->Unit(benchmark::kMillisecond);

void BM_MonteCarloOracle(benchmark::State& state) {
  const FieldFn f = FieldFn::slit_angle();
  for (auto _ : state)
    benchmark::DoNotOptimize(mc_oracle(f, {0.8, 1.5}, slit()->domain(), false, 100'000, 1, 1));
  state.SetItemsProcessed(state.iterations() * 100'000);
}
BENCHMARK(BM_MonteCarloOracle)->Unit(benchmark::kMillisecond);

void BM_KUpperOpt(benchmark::State& state) {
  const FieldFn f = FieldFn::slit_angle();
  const double p = static_cast<double>(state.range(0)) / 10.0;
  const double ell = 1.0 / 16;
  const auto space = cached_fe_space(*slit(), ell / 2);
  KOptions opt;
  opt.threads = 1;
  for (auto _ : state) benchmark::DoNotOptimize(k_upper_opt(f, ell, *space, p, opt));
}
BENCHMARK(BM_KUpperOpt)->Arg(20)->Arg(15)->Arg(30)->Unit(benchmark::kMillisecond);

void BM_KUpperConstructive(benchmark::State& state) {
  const FieldFn f = FieldFn::slit_angle();
  const double ell = 1.0 / 16;
  auto pu = std::make_shared<const PartitionOfUnity>(slit()->partition(ell));
  KOptions opt;
  opt.threads = 1;
  for (auto _ : state) benchmark::DoNotOptimize(k_upper_constructive(f, ell, pu, 1.5, opt));
}
BENCHMARK(BM_KUpperConstructive)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();

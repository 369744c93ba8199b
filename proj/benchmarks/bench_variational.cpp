#include <benchmark/benchmark.h>

#include "flatlab/fields.hpp"
#include "flatlab/variational.hpp"

using namespace flatlab;

namespace {

FieldSpec plane_metric() { return random_spd_metric(3, 2, ChartBox::cube(2, -0.5, 0.5, 5)); }

}  // namespace

static void BM_Functional(benchmark::State& state) {
  const FunctionalId id = residual_catalog()[static_cast<std::size_t>(state.range(0))];
  const int cells = static_cast<int>(state.range(1));
  const FieldSpec s = plane_metric();
  const GridQuadrature q = GridQuadrature::uniform(s.box, cells, 2);
  for (auto _ : state) benchmark::DoNotOptimize(functional(id, s, q));
  state.SetLabel(id.name());
  state.counters["points"] = static_cast<double>(q.points().size());
}
BENCHMARK(BM_Functional)->ArgsProduct({{0, 1, 5}, {16, 48}})->Unit(benchmark::kMillisecond);

static void BM_Residual(benchmark::State& state) {
  const FunctionalId id = residual_catalog()[static_cast<std::size_t>(state.range(0))];
  const FieldSpec s = plane_metric();
  const FDConfig fd = FDConfig::defaults(s.box);
  const Point x = s.box.center();
  for (auto _ : state) benchmark::DoNotOptimize(el_residual(id, s, x, fd).max_abs());
  state.SetLabel(id.name());
}
BENCHMARK(BM_Residual)->DenseRange(0, 6);

static void BM_GateauxDerivative(benchmark::State& state) {
  const FunctionalId id = FunctionalId::parse("ConnNorm/Metric");
  const FieldSpec s = plane_metric();
  const GridQuadrature q = GridQuadrature::uniform(s.box, static_cast<int>(state.range(0)), 2);
  const BumpPerturbation b = BumpPerturbation::random(id.variable, q.region(), 1);
  const FDConfig fd = FDConfig::defaults(s.box);
  for (auto _ : state) benchmark::DoNotOptimize(gateaux_derivative(id, s, b, q, 1e-3, fd));
}
BENCHMARK(BM_GateauxDerivative)->Arg(24)->Arg(48)->Unit(benchmark::kMillisecond);

static void BM_MinimizeConformal(benchmark::State& state) {
  const FieldSpec base{ChartBox::cube(2, -1.0, 1.0, 4), 0, field::EuclideanConstant{Matrix2::identity(2)}};
  const FamilySpec fam = FamilySpec::conformal(base, {{0, 0, 0, 1, 1}});
  const GridQuadrature q = GridQuadrature::uniform(base.box, 16);
  const std::vector<double> t0{0.3};
  const FunctionalId id = FunctionalId::parse("RiemannNorm/Metric");
  for (auto _ : state) benchmark::DoNotOptimize(minimize_deviation(id, fam, t0, q));
}
BENCHMARK(BM_MinimizeConformal)->Unit(benchmark::kMillisecond);

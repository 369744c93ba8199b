#include <benchmark/benchmark.h>

#include "flatlab/algebra.hpp"
#include "flatlab/curvature.hpp"
#include "flatlab/fields.hpp"

using namespace flatlab;

namespace {

FieldSpec test_metric(int n) { return random_spd_metric(42, 2, ChartBox::cube(n, -1.0, 1.0)); }

Point probe(int n) { return Point(static_cast<std::size_t>(n), 0.1); }

}  // namespace

static void BM_MetricJet(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto method = state.range(1) ? JetMethod::FiniteDifference : JetMethod::Analytic;
  const FieldSpec s = test_metric(n);
  const FDConfig fd = FDConfig::defaults(s.box);
  const Point x = probe(n);
  for (auto _ : state) benchmark::DoNotOptimize(eval_metric_jet2(s, x, fd, method));
  state.SetLabel(method == JetMethod::Analytic ? "analytic" : "finite-difference");
}
BENCHMARK(BM_MetricJet)->ArgsProduct({{2, 3, 4, 6}, {0, 1}});

static void BM_CurvatureBundle(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const FieldSpec s = test_metric(n);
  const MetricJet2 j = eval_metric_jet2(s, probe(n), FDConfig::defaults(s.box));
  for (auto _ : state) benchmark::DoNotOptimize(curvature_bundle(j));
}
BENCHMARK(BM_CurvatureBundle)->DenseRange(2, 6);

static void BM_RiemannLower(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const FieldSpec s = test_metric(n);
  const MetricJet2 j = eval_metric_jet2(s, probe(n), FDConfig::defaults(s.box));
  for (auto _ : state) benchmark::DoNotOptimize(riemann_lower(j));
}
BENCHMARK(BM_RiemannLower)->DenseRange(2, 6);

// Covariant derivative of curvature, including the FD curvature derivative.
static void BM_SecondBianchi(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const FieldSpec s = test_metric(n);
  const FDConfig fd = FDConfig::defaults(s.box);
  const Point x = probe(n);
  for (auto _ : state) {
    const ConnectionJet1 cj = connection_jet(s, x, fd);
    const Array5 nr = covariant_derivative_R(cj, riemann_mixed(cj), riemann_derivative(s, x, fd));
    benchmark::DoNotOptimize(second_bianchi_residual(nr));
  }
}
BENCHMARK(BM_SecondBianchi)->DenseRange(2, 4);

static void BM_ApplyT4(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  Array4 x(n);
  double v = 0.1;
  for (double& e : x.flat()) e = (v = v * 1.7 - static_cast<int>(v * 1.7));
  for (auto _ : state) benchmark::DoNotOptimize(apply_T4(x));
}
BENCHMARK(BM_ApplyT4)->DenseRange(2, 6);

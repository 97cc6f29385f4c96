#include <benchmark/benchmark.h>

#include "zoomctl/closed_loop.hpp"
#include "zoomctl/quantizer.hpp"
#include "zoomctl/random.hpp"
#include "zoomctl/transforms.hpp"

using namespace zoomctl;

namespace {

LinearSystem scalar_system() {
  return LinearSystem(Matrix::Constant(1, 1, 2.0), Matrix::Constant(1, 1, 1.0),
                      {Matrix::Constant(1, 1, 1.0)});
}

LinearSystem jordan4_system() {
  Matrix A = Matrix::Zero(4, 4);
  A << 2, 1, 0, 0, 0, 2, 0, 0, 0, 0, 3, 0, 0, 0, 0, -1.5;
  return LinearSystem(A, Matrix::Identity(4, 4), {Matrix::Identity(4, 4)});
}

void BM_ScalarEncodeDecode(benchmark::State& state) {
  const int K = static_cast<int>(state.range(0));
  GaussianSource src(1, 0);
  double delta = 0.75;
  for (auto _ : state) {
    const double x = src.next_normal() * 0.3 * K * delta;
    const int sym = scalar_encode(x, delta, K);
    benchmark::DoNotOptimize(scalar_decode(sym, delta, K));
  }
}
BENCHMARK(BM_ScalarEncodeDecode)->Arg(4)->Arg(16)->Arg(64);

void BM_UpdateBins(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  ZoomParams zoom;
  BinInit init = init_bins(4.0, n, BinMode::kReal, zoom);
  BinState bins = init.bins;
  std::int64_t q = 0;
  for (auto _ : state) {
    bins = update_bins(q, bins, init.zoom, 4.0);
    q = 1 - q;
    benchmark::DoNotOptimize(bins.delta(0));
  }
}
BENCHMARK(BM_UpdateBins)->Arg(1)->Arg(4)->Arg(8);

void BM_LoopStep(benchmark::State& state) {
  const bool scalar = state.range(0) == 1;
  const LinearSystem sys = scalar ? scalar_system() : jordan4_system();
  LoopConfig cfg;
  const TrialSetup setup = prepare_trial(sys, cfg);
  ClosedLoopState st;
  st.x = Vector::Zero(setup.n);
  st.bins = setup.bins0;
  st.x_hat = Vector::Zero(setup.n);
  GaussianSource src(3, 0);
  std::vector<Vector> v_bars{Vector::Zero(setup.n)};
  for (auto _ : state) {
    const Vector w = 0.1 * src.normal_vector(setup.n);
    v_bars[0] = 0.1 * src.normal_vector(setup.n);
    st = loop_step(st, setup, cfg, w, v_bars);
    if (!st.x.allFinite() || st.x.cwiseAbs().maxCoeff() > 1e100) {
      st.x.setZero();
    }
    benchmark::DoNotOptimize(st.x(0));
  }
}
BENCHMARK(BM_LoopStep)->Arg(1)->Arg(4);

void BM_RunTrial(benchmark::State& state) {
  const LinearSystem sys = scalar_system();
  LoopConfig cfg;
  cfg.horizon = static_cast<int>(state.range(0));
  std::uint64_t seed = 17;
  for (auto _ : state) {
    benchmark::DoNotOptimize(run_trial(sys, cfg, seed++).steps);
  }
  state.SetItemsProcessed(state.iterations() * cfg.horizon);
}
BENCHMARK(BM_RunTrial)->Arg(256)->Arg(2048);

void BM_BuildSampledSystem(benchmark::State& state) {
  const LinearSystem sys = jordan4_system();
  for (auto _ : state) {
    benchmark::DoNotOptimize(build_sampled_system(sys).A_pow(0, 0));
  }
}
BENCHMARK(BM_BuildSampledSystem);

}  // namespace

BENCHMARK_MAIN();

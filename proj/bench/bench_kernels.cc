// Serial reference kernels against their OpenMP counterparts, plus the
// anchor-driven coarse deformation against a per-primitive evaluation.
#include <benchmark/benchmark.h>

#include <random>

#include "adcgs/model/deformation.h"
#include "adcgs/render/renderer.h"
#include "adcgs/tensor/kernels.h"

using namespace adcgs;

namespace {

std::vector<float> random_values(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(-1.f, 1.f);
  std::vector<float> v(n);
  for (float& x : v) x = u(rng);
  return v;
}

std::vector<Splat2D> random_splats(std::size_t n, int size, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> pos(0.0, size), var(0.5, 6.0), unit(0.0, 1.0);
  std::vector<Splat2D> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    Splat2D& s = out[i];
    const double a = var(rng), c = var(rng), b = 0.3 * std::sqrt(a * c) * (2 * unit(rng) - 1);
    s.mean = {pos(rng), pos(rng)};
    s.cov = {a, b, c};
    const double det = a * c - b * b;
    s.conic = {c / det, -b / det, a / det};
    s.depth = 1.0 + unit(rng);
    s.color = {unit(rng), unit(rng), unit(rng)};
    s.opacity = 0.1 + 0.8 * unit(rng);
    s.id = static_cast<std::uint32_t>(i);
  }
  return out;
}

template <bool Parallel>
void BM_Matmul(benchmark::State& state) {
  const std::size_t n = state.range(0), k = 64, m = 64;
  const auto a = random_values(n * k, 1), b = random_values(k * m, 2);
  std::vector<float> c(n * m);
  for (auto _ : state) {
    if constexpr (Parallel) {
      kernels::matmul<float>(a, b, c, n, k, m, false);
    } else {
      kernels::matmul_serial<float>(a, b, c, n, k, m, false);
    }
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * n * k * m);
}

template <bool Parallel>
void BM_MatmulAtB(benchmark::State& state) {
  const std::size_t n = state.range(0), k = 64, m = 64;
  const auto a = random_values(n * k, 3), b = random_values(n * m, 4);
  std::vector<float> c(k * m);
  for (auto _ : state) {
    if constexpr (Parallel) {
      kernels::matmul_at_b<float>(a, b, c, n, k, m);
    } else {
      kernels::matmul_at_b_serial<float>(a, b, c, n, k, m);
    }
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * n * k * m);
}

template <bool Tiled>
void BM_Rasterize(benchmark::State& state) {
  const auto splats = random_splats(state.range(0), 64, 5);
  for (auto _ : state) {
    RenderOutput out = Tiled ? rasterize(splats, 64, 64) : rasterize_bruteforce(splats, 64, 64);
    benchmark::DoNotOptimize(out.image.rgb.data());
  }
}

template <bool AnchorDriven>
void BM_CoarseDeform(benchmark::State& state) {
  const std::size_t anchors = state.range(0), K = 10, n_v = 32, time_dim = 64;
  Mlp<float> f_omega(MlpSpec{{n_v + time_dim, 64, 64, 12}, Activation::kRelu, false}, "f_omega");
  Rng rng(6);
  f_omega.init(rng);
  Tensor<float> f_v({anchors, n_v}, random_values(anchors * n_v, 7));
  Tensor<float> f_t({1, time_dim}, random_values(time_dim, 8));
  for (auto _ : state) {
    Tape<float> tape(false);
    Var<float> out = AnchorDriven
                         ? coarse_deform(tape, f_omega, tape.constant(f_v), tape.constant(f_t))
                         : coarse_deform_per_primitive(tape, f_omega, tape.constant(f_v), tape.constant(f_t), K);
    benchmark::DoNotOptimize(out.value().values().data());
  }
  state.counters["primitives"] = static_cast<double>(anchors * K);
}

}  // namespace

BENCHMARK(BM_Matmul<false>)->Name("matmul/serial")->Arg(4096);
BENCHMARK(BM_Matmul<true>)->Name("matmul/openmp")->Arg(4096);
BENCHMARK(BM_MatmulAtB<false>)->Name("matmul_at_b/serial")->Arg(4096);
BENCHMARK(BM_MatmulAtB<true>)->Name("matmul_at_b/openmp")->Arg(4096);
BENCHMARK(BM_Rasterize<false>)->Name("rasterize/bruteforce")->Arg(500)->Arg(2000);
BENCHMARK(BM_Rasterize<true>)->Name("rasterize/tiled_openmp")->Arg(500)->Arg(2000);
BENCHMARK(BM_CoarseDeform<false>)->Name("coarse_deform/per_primitive")->Arg(1000);
BENCHMARK(BM_CoarseDeform<true>)->Name("coarse_deform/anchor_driven")->Arg(1000);

BENCHMARK_MAIN();

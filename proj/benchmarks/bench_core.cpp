#include <benchmark/benchmark.h>

#include <random>

#include "mlkrim/dataset.hpp"
#include "mlkrim/manifold.hpp"
#include "mlkrim/model.hpp"
#include "mlkrim/sampling.hpp"
#include "mlkrim/solver.hpp"
#include "mlkrim/tensor.hpp"

using namespace mlkrim;

namespace {

struct Problem {
  ModelConfig cfg;
  KernelDictionary kernels;
  SamplingMask mask;
  ComplexTensor3 y;
  Hyperparams hp;
  FactorState state;
};

// Default phantom at n x n x n_fr, 4x Cartesian, M kernels, depth Q.
Problem make_problem(std::size_t n, std::size_t n_fr, std::size_t m, std::size_t q) {
  Problem p;
  p.cfg.dims = DataDims(n, n, n_fr);
  p.cfg.m = m;
  p.cfg.q = q;
  if (q >= 3) p.cfg.inner_dims.push_back(2);
  if (q >= 2) p.cfg.inner_dims.push_back(6);
  p.cfg.n_l = 16;
  const Phantom ph = generate_phantom(default_phantom(p.cfg.dims));
  p.mask = cartesian_mask(p.cfg.dims, 4.0, 6, 1);
  p.y = apply_sampling(p.mask, ph.kspace);
  const LandmarkSet lm = select_landmarks(extract_navigator(p.y, 6), p.cfg.n_l);
  p.kernels = build_dictionary(lm, default_specs(lm, m));
  p.hp = default_hyperparams(p.y);
  p.state = init_state(p.cfg, p.kernels, p.mask, p.y, 1);
  return p;
}

ComplexTensor3 random_tensor(const DataDims& dims) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> n;
  ComplexTensor3 t(dims);
  for (auto& v : t.data()) v = {n(rng), n(rng)};
  return t;
}

void BM_Dft2Frames(benchmark::State& st) {
  const auto n = std::size_t(st.range(0));
  const ComplexTensor3 t = random_tensor(DataDims(n, n, 32));
  for (auto _ : st) benchmark::DoNotOptimize(dft2_frames(t, Direction::Forward));
  st.SetItemsProcessed(st.iterations() * 32);
}
BENCHMARK(BM_Dft2Frames)->Arg(64)->Arg(128);

void BM_TemporalDft(benchmark::State& st) {
  const auto n = std::size_t(st.range(0));
  const Matrix x = tensor_to_matrix(random_tensor(DataDims(n, n, 32)));
  for (auto _ : st) benchmark::DoNotOptimize(temporal_dft(x, Direction::Forward));
}
BENCHMARK(BM_TemporalDft)->Arg(64)->Arg(128);

void BM_Forward(benchmark::State& st) {
  const Problem p = make_problem(64, 32, std::size_t(st.range(0)), std::size_t(st.range(1)));
  for (auto _ : st) benchmark::DoNotOptimize(forward(p.state, p.kernels));
}
BENCHMARK(BM_Forward)->Args({1, 2})->Args({3, 2})->Args({3, 3});

void BM_UpdateB(benchmark::State& st) {
  const Problem p = make_problem(64, 32, std::size_t(st.range(0)), 2);
  for (auto _ : st) benchmark::DoNotOptimize(update_b(p.state, p.kernels, p.hp));
}
BENCHMARK(BM_UpdateB)->Arg(1)->Arg(3);

void BM_UpdateX(benchmark::State& st) {
  const Problem p = make_problem(64, 32, 1, 2);
  for (auto _ : st) benchmark::DoNotOptimize(update_x(p.state, p.kernels, p.mask, p.y, p.hp));
}
BENCHMARK(BM_UpdateX);

void BM_OuterIteration(benchmark::State& st) {
  Problem p = make_problem(64, 32, 1, 2);
  p.hp.max_outer = 10;
  p.hp.tol_rel = 0.0;
  for (auto _ : st) benchmark::DoNotOptimize(sca_solve(p.cfg, p.kernels, p.mask, p.y, p.hp, 1));
  st.SetItemsProcessed(st.iterations() * 10);
}
BENCHMARK(BM_OuterIteration)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();

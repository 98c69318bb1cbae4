#include <benchmark/benchmark.h>

#include <cmath>

#include "sharpnorm/dataset.hpp"
#include "sharpnorm/hessian.hpp"
#include "sharpnorm/net_ops.hpp"
#include "sharpnorm/rng.hpp"
#include "sharpnorm/sharpness.hpp"
#include "sharpnorm/variance_opt.hpp"

namespace {

using namespace sharpnorm;

struct MlpFixture {
  NetworkSpec net;
  ParamStore params;
  RowMat X;
  std::vector<int> y;

  MlpFixture(int in, int hidden, int classes, int batch)
      : net({dense(in, hidden), relu(), dense(hidden, hidden), relu(), dense(hidden, classes)},
            {in}, classes),
        params(ParamStore::zeros(net)) {
    Rng rng(1);
    for (double& v : params.flat()) v = 0.1 * rng.normal();
    X.resize(batch, in);
    for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = rng.normal();
    y.resize(static_cast<std::size_t>(batch));
    for (auto& label : y) label = static_cast<int>(rng.uniform_int(0, classes - 1));
  }
};

void bm_forward_batch(benchmark::State& state) {
  MlpFixture f(784, 64, 10, static_cast<int>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(forward_batch(f.net, f.params, f.X));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(bm_forward_batch)->Arg(32)->Arg(128)->Arg(512);

void bm_gradient(benchmark::State& state) {
  MlpFixture f(784, 64, 10, static_cast<int>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(gradient(f.net, f.params, f.X, f.y, LossId::Nsce));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(bm_gradient)->Arg(32)->Arg(128);

void bm_hutchinson_probe(benchmark::State& state) {
  MlpFixture f(64, 32, 10, 64);
  ProbeConfig cfg;
  cfg.num_probes = static_cast<int>(state.range(0));
  cfg.seed = 5;
  for (auto _ : state) {
    benchmark::DoNotOptimize(hutchinson_diag(f.net, f.params, f.X, f.y, LossId::Nsce, cfg));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(bm_hutchinson_probe)->Arg(8)->Arg(32);

void bm_exact_diag_oracle(benchmark::State& state) {
  MlpFixture f(20, 16, 2, 32);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        exact_diag_oracle(f.net, f.params, f.X, f.y, LossId::Nsce, 1e-4));
  }
}
BENCHMARK(bm_exact_diag_oracle);

void bm_coordinate_descent(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  RowMat a(n, n), b(n, n);
  Rng rng(9);
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    a.data()[i] = 0.1 + std::abs(rng.normal());
    b.data()[i] = 0.1 + std::abs(rng.normal());
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(solve_coordinate_descent(a, b));
  }
}
BENCHMARK(bm_coordinate_descent)->Arg(8)->Arg(64)->Arg(256);

void bm_normalized_sharpness(benchmark::State& state) {
  MlpFixture f(784, 64, 10, 32);
  const ParamGroups groups = param_groups(f.net);
  Rng rng(13);
  HessianDiag h;
  h.values.resize(static_cast<Eigen::Index>(f.params.total_params()));
  for (Eigen::Index i = 0; i < h.values.size(); ++i) h.values[i] = std::abs(rng.normal()) + 1e-3;
  h.clipped = true;
  for (auto _ : state) {
    benchmark::DoNotOptimize(normalized_sharpness(f.params, h, groups, 0.5));
  }
}
BENCHMARK(bm_normalized_sharpness);

}  // namespace

BENCHMARK_MAIN();

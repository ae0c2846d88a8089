// Serial reference kernels against their parallel counterparts. Run with
// OMP_NUM_THREADS set to compare thread counts.
#include "border_rdd/geometry.hpp"
#include "border_rdd/raster.hpp"
#include "border_rdd/rdd.hpp"
#include "border_rdd/synth.hpp"

#include <benchmark/benchmark.h>

using namespace border_rdd;

namespace {

struct Sample
{
  std::vector<double> d, y;
  std::vector<std::int64_t> key;
};

Sample
make_sample(std::size_t n)
{
  Rng rng(17);
  Sample s;
  for (std::size_t i = 0; i < n; ++i) {
    const double v = -50.0 + 100.0 * rng.uniform();
    s.d.push_back(v);
    s.y.push_back(3.0 + 2.0 * (v > 0.0) + 0.1 * v + 0.004 * v * v + rng.normal());
    s.key.push_back(static_cast<std::int64_t>(i));
  }
  return s;
}

const World&
world()
{
  static const World w = [] {
    SyntheticWorldConfig c;
    c.lat_max = 31.0;
    return generate_world(c);
  }();
  return w;
}

const FishnetSpec kFishnet{ 0.05, 110.0, 30.0 };

CentroidMap
centroids()
{
  CentroidMap m;
  for (const auto& [id, v] : aggregate_to_cells(*world().grids.lights, kFishnet, Reducer::mean))
    m.emplace(id, cell_centroid(kFishnet, decode_cell(id)));
  return m;
}

template <auto Fn>
void
bm_gram(benchmark::State& state)
{
  const auto n = static_cast<Eigen::Index>(state.range(0));
  Rng rng(3);
  DesignMatrix x(n, 12);
  std::vector<double> w(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < 12; ++j)
      x(i, j) = rng.normal();
    w[static_cast<std::size_t>(i)] = rng.uniform();
  }
  for (auto _ : state)
    benchmark::DoNotOptimize(Fn(x, w));
}

template <auto Fn>
void
bm_nn(benchmark::State& state)
{
  const auto s = make_sample(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state)
    benchmark::DoNotOptimize(Fn(s.d, s.y, s.key, 3));
}

template <auto Fn>
void
bm_cv(benchmark::State& state)
{
  const auto s = make_sample(static_cast<std::size_t>(state.range(0)));
  const auto grid = bandwidth_candidates(s.d, 40);
  for (auto _ : state)
    benchmark::DoNotOptimize(Fn(s.d, s.y, 1, grid, 0.5));
}

template <auto Fn>
void
bm_aggregate(benchmark::State& state)
{
  const auto& grid = *world().grids.lights;
  for (auto _ : state)
    benchmark::DoNotOptimize(Fn(grid, kFishnet, Reducer::mean));
}

void
bm_assign_indexed(benchmark::State& state)
{
  const auto cells = centroids();
  const BorderIndex index(world().polylines().front());
  for (auto _ : state)
    benchmark::DoNotOptimize(assign_cells(cells, index, 50.0));
}

void
bm_assign_reference(benchmark::State& state)
{
  const auto cells = centroids();
  const auto border = world().polylines().front();
  for (auto _ : state)
    benchmark::DoNotOptimize(reference::assign_cells(cells, border, 50.0));
}

} // namespace

BENCHMARK(bm_gram<reference::weighted_gram>)->Name("gram/serial")->Arg(100000);
BENCHMARK(bm_gram<weighted_gram>)->Name("gram/parallel")->Arg(100000);
BENCHMARK(bm_nn<reference::nn_variance>)->Name("nn_variance/serial")->Arg(2000);
BENCHMARK(bm_nn<nn_variance>)->Name("nn_variance/parallel")->Arg(2000)->Arg(50000);
BENCHMARK(bm_cv<reference::cv_criterion>)->Name("cv/serial")->Arg(1000);
BENCHMARK(bm_cv<cv_criterion>)->Name("cv/parallel")->Arg(1000)->Arg(20000);
BENCHMARK(bm_aggregate<reference::aggregate_to_cells>)->Name("aggregate/serial");
BENCHMARK(bm_aggregate<aggregate_to_cells>)->Name("aggregate/parallel");
BENCHMARK(bm_assign_reference)->Name("assign/serial");
BENCHMARK(bm_assign_indexed)->Name("assign/parallel");

BENCHMARK_MAIN();

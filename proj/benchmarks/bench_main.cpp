#include <random>

#include <benchmark/benchmark.h>

#include "bubbletrack/assignment.hpp"
#include "bubbletrack/geometry.hpp"
#include "bubbletrack/kinematics.hpp"
#include "bubbletrack/tracker.hpp"
#include "testkit.hpp"

using namespace bubbletrack;

static void BM_RleRoundTrip(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  const BitMask m = testkit::rasterize_disk(side, side, side / 2.0, side / 2.0, side / 3.0);
  for (auto _ : state) benchmark::DoNotOptimize(decode_mask(encode_mask(m)));
  state.SetItemsProcessed(state.iterations() * side * side);
}
BENCHMARK(BM_RleRoundTrip)->Arg(128)->Arg(512)->Arg(1024);

static void BM_ExtractContour(benchmark::State& state) {
  const int r = static_cast<int>(state.range(0));
  const BitMask m = testkit::rasterize_disk(3 * r, 3 * r, 1.5 * r, 1.5 * r, r);
  for (auto _ : state) benchmark::DoNotOptimize(extract_contour(m));
}
BENCHMARK(BM_ExtractContour)->Arg(20)->Arg(100)->Arg(300);

static void BM_VelocityProfile(benchmark::State& state) {
  const BitMask a = testkit::rasterize_disk(200, 200, 100, 100, 50), b = testkit::rasterize_disk(200, 200, 100, 100, 55);
  for (auto _ : state) benchmark::DoNotOptimize(velocity_profile(a, b, {100, 3000}, 5));
}
BENCHMARK(BM_VelocityProfile);

static void BM_Hungarian(benchmark::State& state) {
  const auto n = static_cast<Eigen::Index>(state.range(0));
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1, 0);
  Eigen::MatrixXd c(n, n);
  for (Eigen::Index i = 0; i < c.size(); ++i) c.data()[i] = u(rng);
  for (auto _ : state) benchmark::DoNotOptimize(solve_assignment(c));
}
BENCHMARK(BM_Hungarian)->Arg(8)->Arg(64)->Arg(256);

static void BM_TrackParallelScene(benchmark::State& state) {
  const Dataset ds = testkit::parallel_scene(static_cast<int>(state.range(0))).dataset;
  for (auto _ : state) benchmark::DoNotOptimize(run_tracker(ds));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_TrackParallelScene)->Arg(100)->Arg(1000);

static void BM_Smooth(benchmark::State& state) {
  std::vector<int> frames(static_cast<std::size_t>(state.range(0)));
  for (std::size_t i = 0; i < frames.size(); ++i) frames[i] = static_cast<int>(i);
  VelocityMap m = make_velocity_map(200, frames);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-30, 30);
  for (auto& v : m.values) v = u(rng);
  for (auto _ : state) benchmark::DoNotOptimize(smooth(m, 2.0, 1.0));
}
BENCHMARK(BM_Smooth)->Arg(100)->Arg(1000);
BENCHMARK_MAIN();

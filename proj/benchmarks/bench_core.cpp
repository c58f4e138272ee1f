#include <benchmark/benchmark.h>

#include "badfusion/metrics.hpp"
#include "badfusion/projection.hpp"
#include "badfusion/rng.hpp"
#include "badfusion/trigger.hpp"

using namespace badfusion;

namespace {

CalibrationSet bench_calibration() {
  CalibrationSet c;
  c.p2 << 721.5, 0, 609.6, 44.9, 0, 721.5, 172.9, 0.2, 0, 0, 1, 0.003;
  c.r0_rect.setIdentity();
  c.tr_velo_to_cam << 0, -1, 0, 0, 0, 0, -1, -0.08, 1, 0, 0, -0.27;
  return c;
}

PointCloud random_cloud(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  PointCloud cloud(n);
  for (auto& p : cloud) {
    p = {static_cast<float>(rng.uniform() * 70), static_cast<float>(rng.normal() * 15),
         static_cast<float>(rng.normal() * 1.5), 0.3f};
  }
  return cloud;
}

void BM_ProjectPoints(benchmark::State& state) {
  const auto cloud = random_cloud(static_cast<std::size_t>(state.range(0)), 1);
  const auto calib = bench_calibration();
  for (auto _ : state) {
    benchmark::DoNotOptimize(project_points(cloud, calib, {1242, 375}));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ProjectPoints)->Arg(1 << 14)->Arg(120000);

void BM_DensestRegion(benchmark::State& state) {
  Rng rng(2);
  const Box2D box{400, 150, 400.0 + state.range(0), 150.0 + state.range(0) * 0.6};
  ProjectedCloud pts;
  for (std::size_t i = 0; i < 500; ++i) {
    pts.entries.push_back({i, box.left + rng.uniform() * box.width(), box.top + rng.uniform() * box.height(), 10});
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(find_densest_region(pts, box, 15, 15, 1, ImageSize{1242, 375}));
  }
}
BENCHMARK(BM_DensestRegion)->Arg(60)->Arg(200)->Arg(400);

void BM_Iou3d(benchmark::State& state) {
  Rng rng(3);
  std::vector<std::pair<Box3D, Box3D>> pairs;
  for (int i = 0; i < 256; ++i) {
    const Box3D a{rng.normal(), 1.6, 20 + rng.normal(), 1.5, 1.6, 3.9, rng.uniform() * 6.28};
    pairs.push_back({a, {a.x + rng.normal(), 1.6, a.z + rng.normal(), 1.5, 1.6, 3.9, rng.uniform() * 6.28}});
  }
  std::size_t i = 0;
  for (auto _ : state) {
    const auto& [a, b] = pairs[i++ & 255];
    benchmark::DoNotOptimize(iou_3d(a, b));
  }
}
BENCHMARK(BM_Iou3d);

}  // namespace
BENCHMARK_MAIN();

#include <benchmark/benchmark.h>

#include "mpnet/geometry.hpp"
#include "mpnet/neuralnet.hpp"
#include "mpnet/pipeline.hpp"
#include "mpnet/planner.hpp"
#include "mpnet/rrtstar.hpp"

using namespace mpnet;

namespace {

Workspace bench_workspace() {
  WorkspaceSpec spec = default_workspace_spec(WorkspaceKind::simple2d);
  spec.seed = 7;
  spec.train_count = 1;
  spec.unseen_count = 0;
  return gen_workspaces(spec).front();
}

}  // namespace

static void BM_PointInFreeSpace(benchmark::State& state) {
  const Workspace w = bench_workspace();
  RngStream rng(1);
  std::vector<Config> points;
  for (int i = 0; i < 1024; ++i) points.emplace_back(rng.uniform(-20, 20), rng.uniform(-20, 20));
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(point_in_free_space(points[i++ & 1023], w));
  }
}
BENCHMARK(BM_PointInFreeSpace);

static void BM_SegmentCollisionFree(benchmark::State& state) {
  const Workspace w = bench_workspace();
  const Config a(-18.0, -18.0), b(18.0, 18.0);
  const double step = state.range(0) == 0 ? kPlanStep : kStrictStep;
  for (auto _ : state) {
    benchmark::DoNotOptimize(segment_collision_free(a, b, w, step));
  }
}
BENCHMARK(BM_SegmentCollisionFree)->Arg(0)->Arg(1);

static void BM_PnetForward(benchmark::State& state) {
  RngStream rng(3);
  const PnetArchitecture arch;
  const MlpParams params = init_mlp(mlp_spec(28 + 4, arch.hidden, 2, arch.dropout_p), rng);
  const Eigen::VectorXd input = Eigen::VectorXd::Constant(32, 0.1);
  RngStream drop(4);
  for (auto _ : state) {
    benchmark::DoNotOptimize(forward(params, input, ForwardMode::stochastic_infer, drop));
  }
}
BENCHMARK(BM_PnetForward);

static void BM_RrtStarFirstSolution(benchmark::State& state) {
  const Workspace w = bench_workspace();
  RrtConfig cfg;
  cfg.max_iters = 20000;
  cfg.post_solution_iters = 0;
  std::uint64_t seed = 0;
  for (auto _ : state) {
    cfg.seed = seed++;
    benchmark::DoNotOptimize(
        rrtstar_plan(w, Config(-15.0, -15.0), GoalRegion{Config(15.0, 15.0), 1.0}, cfg));
  }
}
BENCHMARK(BM_RrtStarFirstSolution)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();

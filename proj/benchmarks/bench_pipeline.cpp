#include "colloc/fusion/estimation.hpp"
#include "colloc/sim/runner.hpp"
#include "colloc/stgl/bundle.hpp"
#include "colloc/stgl/ensemble.hpp"
#include "colloc/stgl/train.hpp"

#include <benchmark/benchmark.h>

#include <map>
#include <random>

using namespace colloc;

namespace {

stgl::ModelBundle random_bundle(int k) {
  stgl::ModelBundle b;
  for (int i = 0; i < k; ++i) b.learner.emplace_back(b.dims, 100 + i);
  b.compensator = b.learner;
  return b;
}

sim::ScenarioConfig scenario(int objects, int robots) {
  sim::ScenarioConfig cfg;
  cfg.object_count = objects;
  cfg.robot_count = robots;
  cfg.duration = 100000;
  return cfg;
}

}  // namespace

static void BM_PipelineTick(benchmark::State& state) {
  const auto bundle = random_bundle(static_cast<int>(state.range(2)));
  sim::PipelineOptions opt;
  opt.log_channel = false;
  sim::Pipeline p(scenario(static_cast<int>(state.range(0)), static_cast<int>(state.range(1))), &bundle, opt);
  for (int i = 0; i < 12; ++i) p.step();
  for (auto _ : state) benchmark::DoNotOptimize(p.step());
}
BENCHMARK(BM_PipelineTick)->Args({10, 4, 5})->Args({6, 4, 5})->Args({10, 1, 5})->Args({10, 4, 1})->Unit(benchmark::kMillisecond);

static void BM_EnsemblePredict(benchmark::State& state) {
  const auto bundle = random_bundle(static_cast<int>(state.range(1)));
  const auto cfg = scenario(static_cast<int>(state.range(0)), 1);
  const auto world = sim::generate_scenario(cfg);
  std::mt19937_64 rng(1);
  stgl::SpatioTemporalGraph history;
  for (int t = 0; t < 8; ++t) history.push(sim::observe(world.trajectories, world.robots[0], t, cfg.dt, rng));
  for (auto _ : state) benchmark::DoNotOptimize(stgl::ensemble_predict_all(bundle.learner, history, 8));
}
BENCHMARK(BM_EnsemblePredict)->Args({10, 5})->Args({10, 1})->Args({1, 1})->Unit(benchmark::kMicrosecond);

static void BM_TrainEpoch(benchmark::State& state) {
  const auto cfg = scenario(6, 1);
  const auto world = sim::generate_scenario(cfg);
  std::mt19937_64 rng(2);
  stgl::SpatioTemporalGraph history;
  std::vector<stgl::TrainSample> data;
  for (int t = 0; t < 8 + state.range(0); ++t) {
    history.push(sim::observe(world.trajectories, world.robots[0], t, cfg.dt, rng));
    if (history.size() < 8) continue;
    std::map<ObjectId, Vec3> truth;
    for (std::size_t i = 0; i < world.trajectories.size(); ++i) {
      truth[world.trajectories[i].id] = world.truth_in_robot(0, i, t + 1);
    }
    if (auto s = stgl::make_sample(history, truth, 8)) data.push_back(*s);
  }
  stgl::TrainConfig tc;
  tc.ensemble_size = 1;
  tc.epochs = 1;
  for (auto _ : state) benchmark::DoNotOptimize(stgl::train_member(data, tc, 0));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(data.size()));
}
BENCHMARK(BM_TrainEpoch)->Arg(32)->Unit(benchmark::kMillisecond);

static void BM_FuseStates(benchmark::State& state) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> d;
  fusion::CompensatedEstimate own{Vec3::Zero(), Mat3::Identity()};
  std::vector<fusion::RemoteEstimate> remote;
  for (int i = 0; i < state.range(0); ++i) {
    remote.push_back({{Vec3(d(rng), d(rng), d(rng)), (1.0 + i) * Mat3::Identity()},
                      fusion::FrameTransform::from_yaw(d(rng), Vec3(d(rng), d(rng), 0))});
  }
  for (auto _ : state) benchmark::DoNotOptimize(fusion::fuse_states(own, remote));
}
BENCHMARK(BM_FuseStates)->Arg(1)->Arg(5);

BENCHMARK_MAIN();

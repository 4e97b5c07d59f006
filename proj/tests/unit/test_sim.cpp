#include "colloc/error.hpp"
#include "colloc/sim/channel.hpp"
#include "colloc/sim/runner.hpp"
#include "colloc/sim/scenario.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <set>

using namespace colloc;
using namespace colloc::sim;

namespace {

fusion::EstimateMessage msg(int object) {
  fusion::EstimateMessage m;
  m.object_id = object;
  m.p_upper = fusion::EstimateMessage::pack(Mat3::Identity());
  return m;
}

stgl::ModelBundle zeros_bundle() {
  stgl::ModelBundle b;
  b.learner = {stgl::StglModel::zeros(b.dims)};
  b.compensator = b.learner;
  return b;
}

double mean_error(const RunLog& log) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& r : log.robots) {
    for (const auto& row : r.rows) {
      sum += (row.fused - row.truth).norm();
      ++n;
    }
  }
  return sum / static_cast<double>(n);
}

}  // namespace

TEST(Scenario, SameSeedSameWorld) {
  ScenarioConfig cfg;
  cfg.seed = 42;
  const auto a = generate_scenario(cfg);
  const auto b = generate_scenario(cfg);
  ASSERT_EQ(a.trajectories.size(), b.trajectories.size());
  for (std::size_t i = 0; i < a.trajectories.size(); ++i) EXPECT_EQ(a.trajectories[i].positions, b.trajectories[i].positions);
  for (std::size_t k = 0; k < a.robots.size(); ++k) {
    EXPECT_EQ(a.robots[k].extrinsics.rotation(), b.robots[k].extrinsics.rotation());
    EXPECT_EQ(a.robots[k].extrinsics.translation(), b.robots[k].extrinsics.translation());
  }
  cfg.seed = 43;
  EXPECT_NE(generate_scenario(cfg).trajectories[0].positions, a.trajectories[0].positions);
}

TEST(Scenario, ConstantVelocityStep) {
  ObjectSpec spec;
  spec.heading = 0.0;
  spec.speed = 1.0;
  spec.start = Vec3(1, 2, 0.5);
  const auto traj = build_trajectory(spec, 50, 0.1);
  ASSERT_EQ(traj.positions.size(), 50u);
  for (std::size_t t = 1; t < traj.positions.size(); ++t) {
    EXPECT_LT((traj.positions[t] - traj.positions[t - 1] - Vec3(0.1, 0, 0)).norm(), 1e-12);
  }
}

TEST(Scenario, TurnTemplateTurnsSharply) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    ScenarioConfig cfg;
    cfg.seed = seed;
    cfg.kinds = {TrajectoryKind::Turn};
    const auto world = generate_scenario(cfg);
    for (const auto& traj : world.trajectories) {
      const auto heading = [&](std::size_t t) {
        const Vec3 d = traj.positions[t + 1] - traj.positions[t];
        return std::atan2(d.y(), d.x());
      };
      double best = 0.0;
      for (std::size_t t = 0; t + 21 < traj.positions.size(); ++t) {
        double change = 0.0;
        for (std::size_t k = t; k < t + 20; ++k) {
          change += std::remainder(heading(k + 1) - heading(k), 2 * std::numbers::pi);
        }
        best = std::max(best, std::abs(change));
      }
      EXPECT_GE(best, std::numbers::pi / 3) << "seed " << seed << " object " << traj.id;
    }
  }
}

TEST(Scenario, RejectsEmptyPopulation) {
  ScenarioConfig cfg;
  cfg.object_count = 0;
  EXPECT_THROW(generate_scenario(cfg), ConfigError);
  cfg.object_count = 3;
  cfg.robot_count = 0;
  EXPECT_THROW(generate_scenario(cfg), ConfigError);
}

TEST(Observe, ZeroNoiseReturnsTruth) {
  ScenarioConfig cfg;
  cfg.noise_a = 0.0;
  cfg.noise_b = 0.0;
  const auto world = generate_scenario(cfg);
  std::mt19937_64 rng(1);
  for (int tick : {0, 17, 63}) {
    for (std::size_t r = 0; r < world.robots.size(); ++r) {
      const auto g = observe(world.trajectories, world.robots[r], tick, cfg.dt, rng);
      ASSERT_EQ(g.size(), world.trajectories.size());
      for (std::size_t i = 0; i < g.size(); ++i) {
        EXPECT_EQ(g.positions[i], world.truth_in_robot(r, static_cast<std::size_t>(g.ids[i]), tick));
      }
      EXPECT_NO_THROW(g.validate());
    }
  }
}

TEST(Observe, NoiseQuadrupleWhenDepthDoubles) {
  RobotSensorModel m;
  m.noise_a = 0.0;
  m.noise_b = 0.002;
  EXPECT_TRUE(m.noise_std(6.0).isApprox(4.0 * m.noise_std(3.0), 1e-15));
  m.noise_scale = 2.0;
  EXPECT_TRUE(m.noise_std(3.0).isApprox(Vec3::Constant(2 * 0.002 * 9), 1e-15));
}

TEST(Observe, AttachedCovarianceMatchesNoise) {
  ScenarioConfig cfg;
  const auto world = generate_scenario(cfg);
  std::mt19937_64 rng(2);
  const auto& robot = world.robots[1];
  const auto g = observe(world.trajectories, robot, 30, cfg.dt, rng);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const Vec3 truth = world.truth_in_robot(1, static_cast<std::size_t>(g.ids[i]), 30);
    EXPECT_TRUE(g.covariances[i].isApprox(robot.noise_covariance(truth.norm()), 1e-12));
  }
}

TEST(Observe, EmpiricalNoiseMatchesModel) {
  ScenarioConfig cfg;
  cfg.noise_scale = 3.0;
  const auto world = generate_scenario(cfg);
  std::mt19937_64 rng(3);
  double sum_sq = 0.0, expect = 0.0;
  for (int trial = 0; trial < 4000; ++trial) {
    const auto g = observe(world.trajectories, world.robots[0], 10, cfg.dt, rng);
    const Vec3 truth = world.truth_in_robot(0, static_cast<std::size_t>(g.ids[0]), 10);
    sum_sq += (g.positions[0] - truth).squaredNorm();
    expect = g.covariances[0].trace();
  }
  EXPECT_NEAR(sum_sq / 4000.0, expect, 0.1 * expect);
}

TEST(Observe, OutOfRangeAndOccludedAbsent) {
  ScenarioConfig cfg;
  cfg.max_range = 0.5;
  auto world = generate_scenario(cfg);
  std::mt19937_64 rng(4);
  EXPECT_TRUE(observe(world.trajectories, world.robots[0], 0, cfg.dt, rng).empty());

  cfg.max_range = 30.0;
  world = generate_scenario(cfg);
  std::vector<OcclusionSpec> occ{{world.robots[0].id, world.trajectories[2].id, 5, 10}};
  const auto hidden = observe(world.trajectories, world.robots[0], 7, cfg.dt, rng, occ);
  EXPECT_FALSE(hidden.index_of(world.trajectories[2].id).has_value());
  EXPECT_EQ(hidden.size(), world.trajectories.size() - 1);
  const auto back = observe(world.trajectories, world.robots[0], 10, cfg.dt, rng, occ);
  EXPECT_TRUE(back.index_of(world.trajectories[2].id).has_value());
}

TEST(Channel, ZeroDelaySameTick) {
  LatencyChannel ch(0, 1, LatencySpec::constant(0.0), 0.1, 1);
  EXPECT_EQ(ch.send(5, {msg(1)}), 5);
  const auto got = ch.deliver(5);
  ASSERT_EQ(got.size(), 1u);
  EXPECT_EQ(got[0].messages[0].object_id, 1);
  EXPECT_EQ(ch.in_flight(), 0u);
}

TEST(Channel, FixedDelayInTicks) {
  LatencyChannel ch(0, 1, LatencySpec::constant(0.3), 0.1, 1);
  EXPECT_EQ(ch.send(4, {msg(1)}), 7);
  EXPECT_TRUE(ch.deliver(6).empty());
  const auto got = ch.deliver(7);
  ASSERT_EQ(got.size(), 1u);
  EXPECT_EQ(got[0].delay_ticks(), 3);
}

TEST(Channel, FifoWithEqualDelays) {
  LatencyChannel ch(0, 1, LatencySpec::constant(0.2), 0.1, 1);
  ch.send(1, {msg(10)});
  ch.send(2, {msg(20)});
  EXPECT_EQ(ch.deliver(3).at(0).messages[0].object_id, 10);
  EXPECT_EQ(ch.deliver(4).at(0).messages[0].object_id, 20);
}

TEST(Channel, RandomDelaysConserveMessages) {
  LatencyChannel ch(2, 3, LatencySpec{0.0, 0.7}, 0.1, 99);
  std::multiset<int> sent, received;
  int last_send = -1, last_deliver = 0;
  for (int tick = 0; tick < 300; ++tick) {
    if (tick < 200) {
      ch.send(tick, {msg(tick), msg(tick + 1000)});
      sent.insert(tick);
      sent.insert(tick + 1000);
    }
    for (const auto& p : ch.deliver(tick)) {
      EXPECT_GT(p.send_tick, last_send);
      EXPECT_GE(p.deliver_tick, last_deliver);
      EXPECT_GE(p.deliver_tick, p.send_tick);
      EXPECT_LE(p.deliver_tick, tick);
      last_send = p.send_tick;
      last_deliver = p.deliver_tick;
      for (const auto& m : p.messages) received.insert(m.object_id);
    }
  }
  EXPECT_EQ(sent, received);
  EXPECT_EQ(ch.in_flight_messages(), 0u);
}

TEST(Runner, ZeroNoiseMeasurementOnlyIsExact) {
  ScenarioConfig cfg;
  cfg.robot_count = 1;
  cfg.noise_a = 0.0;
  cfg.noise_b = 0.0;
  cfg.duration = 40;
  PipelineOptions opt;
  opt.mode = PipelineMode::MeasurementOnly;
  const auto log = run_scenario(cfg, nullptr, opt);
  ASSERT_GT(log.row_count(), 0u);
  EXPECT_EQ(mean_error(log), 0.0);
}

TEST(Runner, ModesWithoutModelsNeedNoBundle) {
  ScenarioConfig cfg;
  cfg.duration = 20;
  PipelineOptions opt;
  EXPECT_THROW(run_scenario(cfg, nullptr, opt), Error);
  opt.mode = PipelineMode::ModelOnly;
  EXPECT_GT(run_scenario(cfg, nullptr, opt).row_count(), 0u);
}

TEST(Runner, SameSeedBitIdentical) {
  ScenarioConfig cfg;
  cfg.duration = 30;
  cfg.latency = {0.1, 0.5};
  const auto bundle = zeros_bundle();
  const auto a = run_scenario(cfg, &bundle);
  const auto b = run_scenario(cfg, &bundle);
  ASSERT_EQ(a.robots.size(), b.robots.size());
  for (std::size_t r = 0; r < a.robots.size(); ++r) EXPECT_EQ(a.robots[r].rows, b.robots[r].rows);
  EXPECT_EQ(a.channel, b.channel);
  EXPECT_GT(a.channel.size(), 0u);
  EXPECT_EQ(a.messages_sent, a.channel.size() + a.messages_undelivered);
}

TEST(Runner, TwoRobotsBeatOne) {
  const auto bundle = zeros_bundle();
  double fused = 0.0, single = 0.0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    ScenarioConfig cfg;
    cfg.seed = seed;
    cfg.duration = 40;
    cfg.object_count = 3;
    cfg.noise_a = 0.1;
    for (int k = 0; k < 2; ++k) {
      RobotSpec r;
      r.id = k;
      r.extrinsics = fusion::FrameTransform::identity();
      r.noise_a = cfg.noise_a;
      r.latency = LatencySpec::constant(0.0);
      cfg.robots.push_back(r);
    }
    PipelineOptions opt;
    fused += mean_error(run_scenario(cfg, &bundle, opt));
    opt.collaborate = false;
    single += mean_error(run_scenario(cfg, &bundle, opt));
  }
  EXPECT_LT(fused, single);
}

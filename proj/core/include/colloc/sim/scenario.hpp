#pragma once

#include "colloc/fusion/types.hpp"
#include "colloc/stgl/graph.hpp"

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace colloc::sim {

enum class TrajectoryKind { ConstantVelocity, Turn, Spline };

std::string_view to_string(TrajectoryKind kind);
std::optional<TrajectoryKind> parse_trajectory_kind(std::string_view name);

/// Per-message delay, drawn uniformly from [min, max] seconds (fixed when equal).
struct LatencySpec {
  double min = 0.3;
  double max = 0.3;

  bool fixed() const { return min == max; }
  static LatencySpec constant(double seconds) { return {seconds, seconds}; }
};

/// Explicit object definition. Generated scenarios fill these from the seed.
struct ObjectSpec {
  ObjectId id = 0;
  TrajectoryKind kind = TrajectoryKind::ConstantVelocity;
  Vec3 start = Vec3::Zero();   // world frame, metres
  double heading = 0.0;        // radians about +z
  double speed = 1.0;          // m/s
  double turn_rate = 0.0;      // rad/s while turning (Turn)
  int turn_start = 0;          // tick the turn begins (Turn)
  int turn_ticks = 20;         // duration of the turn (Turn)
  std::vector<Vec3> waypoints; // control points (Spline), first = start
};

/// Explicit robot definition. `extrinsics` maps the robot frame into the world.
struct RobotSpec {
  RobotId id = 0;
  fusion::FrameTransform extrinsics;
  double max_range = 30.0;
  double noise_a = 0.02;  // m
  double noise_b = 0.001; // m^-1
  Vec3 axis_scale = Vec3::Ones();
  LatencySpec latency;
};

/// Removes `object` from `robot`'s observations for ticks [start_tick, end_tick).
struct OcclusionSpec {
  RobotId robot = 0;
  ObjectId object = 0;
  int start_tick = 0;
  int end_tick = 0;
};

inline constexpr double kMaxLatency = 0.7;

/// Synthetic world description. When `objects` / `robots` are empty they are
/// generated from the population parameters and the seed.
struct ScenarioConfig {
  double dt = 0.1;
  int duration = 100;
  std::uint64_t seed = 1;

  int object_count = 6;
  std::vector<TrajectoryKind> kinds{TrajectoryKind::ConstantVelocity, TrajectoryKind::Turn, TrajectoryKind::Spline};
  double speed_min = 0.6;
  double speed_max = 1.4;
  double arena_radius = 5.0;
  double object_height = 0.5;

  int robot_count = 4;
  double ring_radius = 8.0;
  double robot_height = 1.0;
  double max_range = 30.0;
  double noise_a = 0.02;
  double noise_b = 0.001;
  Vec3 axis_scale = Vec3::Ones();
  LatencySpec latency;
  /// Multiplies every sensor noise standard deviation.
  double noise_scale = 1.0;

  std::vector<OcclusionSpec> occlusions;
  std::vector<ObjectSpec> objects;
  std::vector<RobotSpec> robots;

  /// Throws ConfigError listing every violated constraint.
  void validate() const;
  std::vector<std::string> errors() const;
};

struct ObjectTrajectory {
  ObjectId id = 0;
  TrajectoryKind kind = TrajectoryKind::ConstantVelocity;
  std::vector<Vec3> positions;  // world frame, one per tick
};

/// Depth-dependent sensor: per-axis noise std = noise_scale * axis_scale_k * (a + b * depth^2).
struct RobotSensorModel {
  RobotId id = 0;
  fusion::FrameTransform extrinsics;  // robot -> world
  double max_range = 30.0;
  double noise_a = 0.02;
  double noise_b = 0.001;
  Vec3 axis_scale = Vec3::Ones();
  double noise_scale = 1.0;
  LatencySpec latency;

  Vec3 noise_std(double depth) const;
  Mat3 noise_covariance(double depth) const;
};

class LatencyChannel;

struct World {
  ScenarioConfig config;
  std::vector<ObjectSpec> object_specs;
  std::vector<ObjectTrajectory> trajectories;
  std::vector<RobotSensorModel> robots;

  std::size_t robot_index(RobotId id) const;
  /// Ground truth of `object` at `tick` expressed in `robot`'s frame.
  Vec3 truth_in_robot(std::size_t robot, std::size_t object, int tick) const;
};

/// Deterministic world for a config: trajectories, sensor models. Channels are
/// created by the pipeline from the robots' latency specs.
World generate_scenario(const ScenarioConfig& config);

ObjectTrajectory build_trajectory(const ObjectSpec& spec, int duration, double dt);

/// Observation of every in-range, unoccluded object at `tick`: frame-transformed
/// truth plus Gaussian noise of covariance R(depth), which is attached to the
/// node. Edges are fully connected.
stgl::ObservationGraph observe(std::span<const ObjectTrajectory> trajectories, const RobotSensorModel& robot,
                               int tick, double dt, std::mt19937_64& rng,
                               std::span<const OcclusionSpec> occlusions = {});

/// Deterministic stream seed derived from the master seed and a tag.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0);

}  // namespace colloc::sim

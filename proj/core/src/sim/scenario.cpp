#include "colloc/sim/scenario.hpp"

#include "colloc/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace colloc::sim {

namespace {

constexpr double kPi = std::numbers::pi;

Vec3 catmull_rom(const Vec3& p0, const Vec3& p1, const Vec3& p2, const Vec3& p3, double t) {
  const double t2 = t * t;
  const double t3 = t2 * t;
  return 0.5 * ((2.0 * p1) + (-p0 + p2) * t + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * t2 +
                (-p0 + 3.0 * p1 - 3.0 * p2 + p3) * t3);
}

std::vector<Vec3> spline_positions(const ObjectSpec& spec, int duration, double dt) {
  const auto& w = spec.waypoints;
  if (w.size() < 2) throw ConfigError(fmt::format("object {}: spline needs at least 2 waypoints", spec.id));
  constexpr int kSamples = 64;
  std::vector<Vec3> dense;
  std::vector<double> arc;
  for (std::size_t i = 0; i + 1 < w.size(); ++i) {
    const Vec3& p0 = w[i == 0 ? 0 : i - 1];
    const Vec3& p3 = w[std::min(i + 2, w.size() - 1)];
    for (int s = (i == 0 ? 0 : 1); s <= kSamples; ++s) {
      Vec3 p = catmull_rom(p0, w[i], w[i + 1], p3, static_cast<double>(s) / kSamples);
      arc.push_back(dense.empty() ? 0.0 : arc.back() + (p - dense.back()).norm());
      dense.push_back(p);
    }
  }
  std::vector<Vec3> out;
  out.reserve(static_cast<std::size_t>(duration));
  std::size_t seg = 0;
  for (int t = 0; t < duration; ++t) {
    const double s = spec.speed * dt * t;
    if (s >= arc.back()) {
      // Past the last waypoint: continue along the final tangent.
      const Vec3 dir = (dense.back() - dense[dense.size() - 2]).normalized();
      out.push_back(dense.back() + dir * (s - arc.back()));
      continue;
    }
    while (arc[seg + 1] < s) ++seg;
    const double span = arc[seg + 1] - arc[seg];
    const double f = span > 0.0 ? (s - arc[seg]) / span : 0.0;
    out.push_back(dense[seg] + f * (dense[seg + 1] - dense[seg]));
  }
  return out;
}

}  // namespace

std::string_view to_string(TrajectoryKind kind) {
  switch (kind) {
    case TrajectoryKind::ConstantVelocity: return "constant_velocity";
    case TrajectoryKind::Turn: return "turn";
    case TrajectoryKind::Spline: return "spline";
  }
  return "unknown";
}

std::optional<TrajectoryKind> parse_trajectory_kind(std::string_view name) {
  if (name == "constant_velocity" || name == "cv") return TrajectoryKind::ConstantVelocity;
  if (name == "turn") return TrajectoryKind::Turn;
  if (name == "spline" || name == "waypoint_spline") return TrajectoryKind::Spline;
  return std::nullopt;
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  auto mix = [](std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(mix(master) ^ a) ^ b) ^ c);
}

std::vector<std::string> ScenarioConfig::errors() const {
  std::vector<std::string> e;
  if (!(dt > 0.0)) e.push_back(fmt::format("scenario.dt: must be positive (got {})", dt));
  if (duration < 1) e.push_back(fmt::format("scenario.duration: must be >= 1 (got {})", duration));
  const int n_objects = objects.empty() ? object_count : static_cast<int>(objects.size());
  const int n_robots = robots.empty() ? robot_count : static_cast<int>(robots.size());
  if (n_objects < 1) e.push_back("objects.count: at least one object is required");
  if (n_robots < 1) e.push_back("robots.count: at least one robot is required");
  if (kinds.empty() && objects.empty()) e.push_back("objects.kinds: must list at least one trajectory kind");
  if (!(speed_min > 0.0) || speed_max < speed_min) {
    e.push_back(fmt::format("objects.speed: need 0 < min <= max (got {}..{})", speed_min, speed_max));
  }
  if (!(arena_radius > 0.0)) e.push_back("objects.arena_radius: must be positive");
  if (!(ring_radius > 0.0)) e.push_back("robots.ring_radius: must be positive");
  if (!(max_range > 0.0)) e.push_back("robots.max_range: must be positive");
  if (!(noise_a >= 0.0)) e.push_back(fmt::format("robots.noise_a: must be >= 0 (got {})", noise_a));
  if (noise_b < 0.0) e.push_back(fmt::format("robots.noise_b: must be >= 0 (got {})", noise_b));
  if ((axis_scale.array() <= 0.0).any()) e.push_back("robots.axis_scale: entries must be positive");
  if (!(noise_scale >= 0.0)) e.push_back(fmt::format("robots.noise_scale: must be >= 0 (got {})", noise_scale));
  auto check_latency = [&](const LatencySpec& l, const std::string& where) {
    if (l.min < 0.0 || l.max < 0.0) e.push_back(fmt::format("{}: latency must be >= 0 (got {}..{})", where, l.min, l.max));
    else if (l.max > kMaxLatency + 1e-9) e.push_back(fmt::format("{}: latency must be <= {} s (got {})", where, kMaxLatency, l.max));
    else if (l.max < l.min) e.push_back(fmt::format("{}: latency max below min", where));
  };
  check_latency(latency, "robots.latency");
  for (const auto& r : robots) {
    check_latency(r.latency, fmt::format("robots[{}].latency", r.id));
    if (!(r.noise_a >= 0.0) || r.noise_b < 0.0) e.push_back(fmt::format("robots[{}]: need noise_a >= 0, noise_b >= 0", r.id));
  }
  for (const auto& o : occlusions) {
    if (o.end_tick < o.start_tick) e.push_back(fmt::format("occlusions: window end {} before start {}", o.end_tick, o.start_tick));
  }
  return e;
}

void ScenarioConfig::validate() const {
  auto e = errors();
  if (e.empty()) return;
  std::string msg = "invalid scenario:";
  for (const auto& s : e) msg += "\n  " + s;
  throw ConfigError(msg);
}

Vec3 RobotSensorModel::noise_std(double depth) const {
  return noise_scale * (noise_a + noise_b * depth * depth) * axis_scale;
}

Mat3 RobotSensorModel::noise_covariance(double depth) const {
  return noise_std(depth).cwiseAbs2().asDiagonal();
}

std::size_t World::robot_index(RobotId id) const {
  for (std::size_t i = 0; i < robots.size(); ++i) {
    if (robots[i].id == id) return i;
  }
  throw Error(fmt::format("unknown robot {}", id));
}

Vec3 World::truth_in_robot(std::size_t robot, std::size_t object, int tick) const {
  return robots[robot].extrinsics.inverse().apply(trajectories[object].positions[static_cast<std::size_t>(tick)]);
}

ObjectTrajectory build_trajectory(const ObjectSpec& spec, int duration, double dt) {
  ObjectTrajectory traj{spec.id, spec.kind, {}};
  traj.positions.reserve(static_cast<std::size_t>(duration));
  switch (spec.kind) {
    case TrajectoryKind::ConstantVelocity: {
      const Vec3 v(std::cos(spec.heading) * spec.speed, std::sin(spec.heading) * spec.speed, 0.0);
      for (int t = 0; t < duration; ++t) traj.positions.push_back(spec.start + v * (dt * t));
      break;
    }
    case TrajectoryKind::Turn: {
      Vec3 p = spec.start;
      double heading = spec.heading;
      for (int t = 0; t < duration; ++t) {
        traj.positions.push_back(p);
        const bool turning = t >= spec.turn_start && t < spec.turn_start + spec.turn_ticks;
        // Midpoint heading over the tick keeps arcs symmetric.
        const double next = turning ? heading + spec.turn_rate * dt : heading;
        const double mid = 0.5 * (heading + next);
        p += Vec3(std::cos(mid), std::sin(mid), 0.0) * (spec.speed * dt);
        heading = next;
      }
      break;
    }
    case TrajectoryKind::Spline:
      traj.positions = spline_positions(spec, duration, dt);
      break;
  }
  return traj;
}

World generate_scenario(const ScenarioConfig& config) {
  config.validate();
  World world;
  world.config = config;
  std::mt19937_64 rng(derive_seed(config.seed, 1));
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  if (!config.objects.empty()) {
    world.object_specs = config.objects;
  } else {
    for (int k = 0; k < config.object_count; ++k) {
      ObjectSpec s;
      s.id = k;
      s.kind = config.kinds[static_cast<std::size_t>(k) % config.kinds.size()];
      s.speed = config.speed_min + (config.speed_max - config.speed_min) * unit(rng);
      const double angle = 2.0 * kPi * unit(rng);
      const double radius = config.arena_radius * (0.6 + 0.3 * unit(rng));
      s.start = Vec3(radius * std::cos(angle), radius * std::sin(angle), config.object_height);
      s.heading = angle + kPi + (unit(rng) - 0.5);
      const double turn_deg = 45.0 + 45.0 * unit(rng);
      s.turn_rate = (unit(rng) < 0.5 ? -1.0 : 1.0) * turn_deg * kPi / 180.0;
      s.turn_ticks = 20;
      s.turn_start = 10 + static_cast<int>(unit(rng) * std::max(1, config.duration / 2));
      // Spline control points inside the arena, spaced by roughly 2 s of travel.
      s.waypoints.push_back(s.start);
      const double needed = s.speed * config.dt * config.duration * 1.2 + 1.0;
      double length = 0.0;
      while (length < needed) {
        const double a = 2.0 * kPi * unit(rng);
        const double r = config.arena_radius * std::sqrt(unit(rng));
        Vec3 w(r * std::cos(a), r * std::sin(a), config.object_height);
        if ((w - s.waypoints.back()).norm() < 1.5) continue;
        length += (w - s.waypoints.back()).norm();
        s.waypoints.push_back(w);
      }
      world.object_specs.push_back(s);
    }
  }

  std::vector<RobotSpec> robots = config.robots;
  if (robots.empty()) {
    for (int k = 0; k < config.robot_count; ++k) {
      RobotSpec r;
      r.id = k;
      const double angle = 2.0 * kPi * k / config.robot_count + 0.4 * (unit(rng) - 0.5);
      const Vec3 position(config.ring_radius * std::cos(angle), config.ring_radius * std::sin(angle),
                          config.robot_height);
      r.extrinsics = fusion::FrameTransform::from_yaw(angle + kPi, position, k, -1);
      r.max_range = config.max_range;
      r.noise_a = config.noise_a;
      r.noise_b = config.noise_b;
      r.axis_scale = config.axis_scale;
      r.latency = config.latency;
      robots.push_back(r);
    }
  }
  for (const auto& r : robots) {
    world.robots.push_back(
        {r.id, r.extrinsics, r.max_range, r.noise_a, r.noise_b, r.axis_scale, config.noise_scale, r.latency});
  }
  for (const auto& spec : world.object_specs) {
    world.trajectories.push_back(build_trajectory(spec, config.duration, config.dt));
  }
  return world;
}

stgl::ObservationGraph observe(std::span<const ObjectTrajectory> trajectories, const RobotSensorModel& robot,
                               int tick, double dt, std::mt19937_64& rng, std::span<const OcclusionSpec> occlusions) {
  stgl::ObservationGraph graph;
  graph.timestamp = tick * dt;
  std::normal_distribution<double> normal(0.0, 1.0);
  const fusion::FrameTransform world_to_robot = robot.extrinsics.inverse();
  for (const auto& traj : trajectories) {
    if (tick < 0 || static_cast<std::size_t>(tick) >= traj.positions.size()) {
      throw Error(fmt::format("observe: tick {} outside trajectory of object {}", tick, traj.id));
    }
    const Vec3 local = world_to_robot.apply(traj.positions[static_cast<std::size_t>(tick)]);
    const double depth = local.norm();
    if (depth > robot.max_range) continue;
    const bool occluded = std::any_of(occlusions.begin(), occlusions.end(), [&](const OcclusionSpec& o) {
      return o.robot == robot.id && o.object == traj.id && tick >= o.start_tick && tick < o.end_tick;
    });
    if (occluded) continue;
    const Vec3 std_dev = robot.noise_std(depth);
    Vec3 noise;
    for (int k = 0; k < 3; ++k) noise[k] = std_dev[k] * normal(rng);
    graph.add(traj.id, local + noise, robot.noise_covariance(depth));
  }
  graph.connect_all();
  return graph;
}

}  // namespace colloc::sim

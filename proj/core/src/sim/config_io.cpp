#include "colloc/sim/config_io.hpp"

#include "colloc/error.hpp"
#include "colloc/io.hpp"

#include <fmt/format.h>
#include <yaml-cpp/yaml.h>

#include <set>

namespace colloc::sim {

std::vector<std::uint64_t> SweepSpec::seed_list() const {
  if (!seeds.empty()) return seeds;
  std::vector<std::uint64_t> out;
  for (std::size_t i = 0; i < seed_count; ++i) out.push_back(seed_base + i);
  return out;
}

namespace {

class Reader {
 public:
  explicit Reader(std::vector<std::string>& errors) : errors_(errors) {}

  void error(const YAML::Node& node, const std::string& path, const std::string& msg) {
    if (node.IsDefined() && node.Mark().line >= 0) {
      errors_.push_back(fmt::format("line {}: {}: {}", node.Mark().line + 1, path, msg));
    } else {
      errors_.push_back(fmt::format("{}: {}", path, msg));
    }
  }

  /// Flags keys outside `allowed`; returns false if `node` is not a map.
  bool section(const YAML::Node& node, const std::string& path, std::set<std::string> allowed) {
    if (!node.IsDefined() || node.IsNull()) return false;
    if (!node.IsMap()) {
      error(node, path, "expected a mapping");
      return false;
    }
    for (const auto& kv : node) {
      const auto key = kv.first.as<std::string>();
      if (!allowed.contains(key)) error(kv.first, path.empty() ? key : path + "." + key, "unknown key");
    }
    return true;
  }

  template <class T>
  void get(const YAML::Node& parent, const char* key, const std::string& path, T& out) {
    const YAML::Node node = parent[key];
    if (!node.IsDefined() || node.IsNull()) return;
    const std::string where = path + "." + key;
    if (!node.IsScalar()) {
      error(node, where, "expected a scalar");
      return;
    }
    try {
      out = node.as<T>();
    } catch (const YAML::Exception&) {
      error(node, where, fmt::format("expected {}, got '{}'", type_name<T>(), node.Scalar()));
    }
  }

  template <class T>
  void get_list(const YAML::Node& parent, const char* key, const std::string& path, std::vector<T>& out) {
    const YAML::Node node = parent[key];
    if (!node.IsDefined() || node.IsNull()) return;
    const std::string where = path + "." + key;
    if (!node.IsSequence()) {
      error(node, where, "expected a list");
      return;
    }
    std::vector<T> values;
    for (std::size_t i = 0; i < node.size(); ++i) {
      try {
        values.push_back(node[i].as<T>());
      } catch (const YAML::Exception&) {
        error(node[i], fmt::format("{}[{}]", where, i), fmt::format("expected {}", type_name<T>()));
        return;
      }
    }
    out = std::move(values);
  }

 private:
  template <class T>
  static const char* type_name() {
    if constexpr (std::is_same_v<T, bool>) return "true/false";
    else if constexpr (std::is_integral_v<T>) return "an integer";
    else if constexpr (std::is_floating_point_v<T>) return "a number";
    else return "a string";
  }

  std::vector<std::string>& errors_;
};

void read_latency(Reader& rd, const YAML::Node& node, const std::string& path, LatencySpec& out) {
  if (!node.IsDefined() || node.IsNull()) return;
  try {
    if (node.IsScalar()) {
      out = LatencySpec::constant(node.as<double>());
    } else if (node.IsSequence() && node.size() == 2) {
      out = {node[0].as<double>(), node[1].as<double>()};
    } else if (node.IsMap()) {
      rd.section(node, path, {"min", "max"});
      rd.get(node, "min", path, out.min);
      rd.get(node, "max", path, out.max);
    } else {
      rd.error(node, path, "expected seconds, [min, max] or {min, max}");
      return;
    }
  } catch (const YAML::Exception&) {
    rd.error(node, path, "expected seconds, [min, max] or {min, max}");
    return;
  }
  if (out.min < 0.0 || out.max < 0.0) {
    rd.error(node, path, fmt::format("latency must be >= 0 s (got {}..{})", out.min, out.max));
  } else if (out.max > kMaxLatency + 1e-9) {
    rd.error(node, path, fmt::format("latency must be <= {} s (got {})", kMaxLatency, out.max));
  } else if (out.max < out.min) {
    rd.error(node, path, "latency max is below min");
  }
}

}  // namespace

ProjectConfig parse_config(const std::string& text, std::vector<std::string>& errors) {
  ProjectConfig cfg;
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    errors.push_back(fmt::format("line {}: syntax error: {}", e.mark.line + 1, e.msg));
    return cfg;
  }
  Reader rd(errors);
  if (!root.IsDefined() || root.IsNull()) {
    errors.push_back("missing section 'scenario'");
    return cfg;
  }
  if (!root.IsMap()) {
    rd.error(root, "<root>", "expected a mapping of sections");
    return cfg;
  }
  rd.section(root, "", {"scenario", "objects", "robots", "occlusions", "pipeline", "training", "sweep"});
  if (!root["scenario"].IsDefined()) errors.push_back("missing section 'scenario'");

  ScenarioConfig& sc = cfg.scenario;
  const YAML::Node scenario = root["scenario"];
  if (rd.section(scenario, "scenario", {"dt", "duration", "seed"})) {
    rd.get(scenario, "dt", "scenario", sc.dt);
    rd.get(scenario, "duration", "scenario", sc.duration);
    rd.get(scenario, "seed", "scenario", sc.seed);
  }

  const YAML::Node objects = root["objects"];
  if (rd.section(objects, "objects", {"count", "kinds", "speed", "arena_radius", "height"})) {
    rd.get(objects, "count", "objects", sc.object_count);
    std::vector<std::string> kinds;
    rd.get_list(objects, "kinds", "objects", kinds);
    if (objects["kinds"].IsDefined()) {
      sc.kinds.clear();
      for (std::size_t i = 0; i < kinds.size(); ++i) {
        if (auto k = parse_trajectory_kind(kinds[i])) {
          sc.kinds.push_back(*k);
        } else {
          rd.error(objects["kinds"][i], fmt::format("objects.kinds[{}]", i),
                   fmt::format("unknown trajectory kind '{}'", kinds[i]));
        }
      }
    }
    std::vector<double> speed;
    rd.get_list(objects, "speed", "objects", speed);
    if (!speed.empty()) {
      if (speed.size() != 2) {
        rd.error(objects["speed"], "objects.speed", "expected [min, max]");
      } else {
        sc.speed_min = speed[0];
        sc.speed_max = speed[1];
      }
    }
    rd.get(objects, "arena_radius", "objects", sc.arena_radius);
    rd.get(objects, "height", "objects", sc.object_height);
  }

  const YAML::Node robots = root["robots"];
  if (rd.section(robots, "robots", {"count", "ring_radius", "height", "max_range", "noise_a", "noise_b",
                                     "noise_scale", "axis_scale", "latency"})) {
    rd.get(robots, "count", "robots", sc.robot_count);
    rd.get(robots, "ring_radius", "robots", sc.ring_radius);
    rd.get(robots, "height", "robots", sc.robot_height);
    rd.get(robots, "max_range", "robots", sc.max_range);
    rd.get(robots, "noise_a", "robots", sc.noise_a);
    rd.get(robots, "noise_b", "robots", sc.noise_b);
    rd.get(robots, "noise_scale", "robots", sc.noise_scale);
    std::vector<double> axis;
    rd.get_list(robots, "axis_scale", "robots", axis);
    if (!axis.empty()) {
      if (axis.size() != 3) rd.error(robots["axis_scale"], "robots.axis_scale", "expected 3 values");
      else sc.axis_scale = Vec3(axis[0], axis[1], axis[2]);
    }
    read_latency(rd, robots["latency"], "robots.latency", sc.latency);
  }

  const YAML::Node occlusions = root["occlusions"];
  if (occlusions.IsDefined() && !occlusions.IsNull()) {
    if (!occlusions.IsSequence()) {
      rd.error(occlusions, "occlusions", "expected a list");
    } else {
      for (std::size_t i = 0; i < occlusions.size(); ++i) {
        const std::string path = fmt::format("occlusions[{}]", i);
        OcclusionSpec o;
        if (rd.section(occlusions[i], path, {"robot", "object", "start", "end"})) {
          rd.get(occlusions[i], "robot", path, o.robot);
          rd.get(occlusions[i], "object", path, o.object);
          rd.get(occlusions[i], "start", path, o.start_tick);
          rd.get(occlusions[i], "end", path, o.end_tick);
          sc.occlusions.push_back(o);
        }
      }
    }
  }

  PipelineOptions& po = cfg.pipeline;
  const YAML::Node pipeline = root["pipeline"];
  if (rd.section(pipeline, "pipeline", {"mode", "collaborate", "compensate", "model_only_q", "initial_variance",
                                         "history_length"})) {
    std::string mode(to_string(po.mode));
    rd.get(pipeline, "mode", "pipeline", mode);
    if (auto m = parse_pipeline_mode(mode)) po.mode = *m;
    else rd.error(pipeline["mode"], "pipeline.mode", fmt::format("unknown mode '{}'", mode));
    rd.get(pipeline, "collaborate", "pipeline", po.collaborate);
    rd.get(pipeline, "compensate", "pipeline", po.compensate);
    rd.get(pipeline, "model_only_q", "pipeline", po.model_only_q);
    rd.get(pipeline, "initial_variance", "pipeline", po.initial_variance);
    rd.get(pipeline, "history_length", "pipeline", po.history_length);
    if (!(po.initial_variance > 0.0)) rd.error(pipeline["initial_variance"], "pipeline.initial_variance", "must be positive");
    if (po.model_only_q < 0.0) rd.error(pipeline["model_only_q"], "pipeline.model_only_q", "must be >= 0");
  }

  TrainingSpec& tr = cfg.training;
  const YAML::Node training = root["training"];
  if (rd.section(training, "training", {"ensemble_size", "epochs", "compensator_epochs", "learning_rate",
                                         "batch_size", "history_length", "seed", "scenarios", "duration",
                                         "scenario_seed", "noise_scales", "max_delay_ticks"})) {
    rd.get(training, "ensemble_size", "training", tr.ensemble_size);
    rd.get(training, "epochs", "training", tr.epochs);
    rd.get(training, "compensator_epochs", "training", tr.compensator_epochs);
    rd.get(training, "learning_rate", "training", tr.learning_rate);
    rd.get(training, "batch_size", "training", tr.batch_size);
    rd.get(training, "history_length", "training", tr.history_length);
    rd.get(training, "seed", "training", tr.seed);
    rd.get(training, "scenarios", "training", tr.scenarios);
    rd.get(training, "duration", "training", tr.duration);
    rd.get(training, "scenario_seed", "training", tr.scenario_seed);
    rd.get_list(training, "noise_scales", "training", tr.noise_scales);
    rd.get(training, "max_delay_ticks", "training", tr.max_delay_ticks);
  }
  for (const auto& e : tr.errors()) errors.push_back(e);
  if (po.history_length != tr.history_length && pipeline["history_length"].IsDefined()) {
    rd.error(pipeline["history_length"], "pipeline.history_length", "must equal training.history_length");
  }
  po.history_length = tr.history_length;

  SweepSpec& sw = cfg.sweep;
  const YAML::Node sweep = root["sweep"];
  if (rd.section(sweep, "sweep", {"seeds", "seed_count", "seed_base", "latency", "robots", "noise"})) {
    rd.get_list(sweep, "seeds", "sweep", sw.seeds);
    rd.get(sweep, "seed_count", "sweep", sw.seed_count);
    rd.get(sweep, "seed_base", "sweep", sw.seed_base);
    for (const char* var : {"latency", "robots", "noise"}) {
      rd.get_list(sweep, var, "sweep", sw.grids[var]);
    }
    for (const auto& [var, grid] : sw.grids) {
      const YAML::Node node = sweep[var];
      if (grid.empty()) rd.error(node, "sweep." + var, "grid must not be empty");
      for (std::size_t i = 1; i < grid.size(); ++i) {
        if (!(grid[i] > grid[i - 1])) {
          rd.error(node, "sweep." + var, "grid must be strictly increasing");
          break;
        }
      }
    }
    for (double v : sw.grids["latency"]) {
      if (v < 0.0 || v > kMaxLatency + 1e-9) {
        rd.error(sweep["latency"], "sweep.latency", fmt::format("{} s is outside [0, {}]", v, kMaxLatency));
      }
    }
    if (sw.seed_list().size() < 5) rd.error(sweep, "sweep.seeds", "at least 5 seeds are required");
  }

  for (const auto& e : sc.errors()) {
    // Latency problems were already reported with their line.
    if (e.find("latency") == std::string::npos) errors.push_back(e);
  }
  return cfg;
}

ProjectConfig parse_config(const std::string& text) {
  std::vector<std::string> errors;
  ProjectConfig cfg = parse_config(text, errors);
  if (!errors.empty()) {
    std::string msg = fmt::format("{} configuration error{}:", errors.size(), errors.size() == 1 ? "" : "s");
    for (const auto& e : errors) msg += "\n  " + e;
    throw ConfigError(msg);
  }
  return cfg;
}

ProjectConfig validate_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError(fmt::format("config file not found: {}", path.string()));
  return parse_config(read_file(path));
}

std::string dump_config(const ProjectConfig& cfg) {
  const ScenarioConfig& sc = cfg.scenario;
  YAML::Emitter out;
  out.SetDoublePrecision(17);
  out << YAML::BeginMap;
  out << YAML::Key << "scenario" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "dt" << YAML::Value << sc.dt;
  out << YAML::Key << "duration" << YAML::Value << sc.duration;
  out << YAML::Key << "seed" << YAML::Value << sc.seed;
  out << YAML::EndMap;

  out << YAML::Key << "objects" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "count" << YAML::Value << sc.object_count;
  out << YAML::Key << "kinds" << YAML::Value << YAML::Flow << YAML::BeginSeq;
  for (auto k : sc.kinds) out << std::string(to_string(k));
  out << YAML::EndSeq;
  out << YAML::Key << "speed" << YAML::Value << YAML::Flow << YAML::BeginSeq << sc.speed_min << sc.speed_max
      << YAML::EndSeq;
  out << YAML::Key << "arena_radius" << YAML::Value << sc.arena_radius;
  out << YAML::Key << "height" << YAML::Value << sc.object_height;
  out << YAML::EndMap;

  out << YAML::Key << "robots" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "count" << YAML::Value << sc.robot_count;
  out << YAML::Key << "ring_radius" << YAML::Value << sc.ring_radius;
  out << YAML::Key << "height" << YAML::Value << sc.robot_height;
  out << YAML::Key << "max_range" << YAML::Value << sc.max_range;
  out << YAML::Key << "noise_a" << YAML::Value << sc.noise_a;
  out << YAML::Key << "noise_b" << YAML::Value << sc.noise_b;
  out << YAML::Key << "noise_scale" << YAML::Value << sc.noise_scale;
  out << YAML::Key << "axis_scale" << YAML::Value << YAML::Flow << YAML::BeginSeq << sc.axis_scale.x()
      << sc.axis_scale.y() << sc.axis_scale.z() << YAML::EndSeq;
  out << YAML::Key << "latency" << YAML::Value << YAML::Flow << YAML::BeginMap;
  out << YAML::Key << "min" << YAML::Value << sc.latency.min << YAML::Key << "max" << YAML::Value << sc.latency.max;
  out << YAML::EndMap;
  out << YAML::EndMap;

  if (!sc.occlusions.empty()) {
    out << YAML::Key << "occlusions" << YAML::Value << YAML::BeginSeq;
    for (const auto& o : sc.occlusions) {
      out << YAML::Flow << YAML::BeginMap << YAML::Key << "robot" << YAML::Value << o.robot << YAML::Key << "object"
          << YAML::Value << o.object << YAML::Key << "start" << YAML::Value << o.start_tick << YAML::Key << "end"
          << YAML::Value << o.end_tick << YAML::EndMap;
    }
    out << YAML::EndSeq;
  }

  const PipelineOptions& po = cfg.pipeline;
  out << YAML::Key << "pipeline" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "mode" << YAML::Value << std::string(to_string(po.mode));
  out << YAML::Key << "collaborate" << YAML::Value << po.collaborate;
  out << YAML::Key << "compensate" << YAML::Value << po.compensate;
  out << YAML::Key << "model_only_q" << YAML::Value << po.model_only_q;
  out << YAML::Key << "initial_variance" << YAML::Value << po.initial_variance;
  out << YAML::Key << "history_length" << YAML::Value << po.history_length;
  out << YAML::EndMap;

  const TrainingSpec& tr = cfg.training;
  out << YAML::Key << "training" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "ensemble_size" << YAML::Value << tr.ensemble_size;
  out << YAML::Key << "epochs" << YAML::Value << tr.epochs;
  out << YAML::Key << "compensator_epochs" << YAML::Value << tr.compensator_epochs;
  out << YAML::Key << "learning_rate" << YAML::Value << tr.learning_rate;
  out << YAML::Key << "batch_size" << YAML::Value << tr.batch_size;
  out << YAML::Key << "history_length" << YAML::Value << tr.history_length;
  out << YAML::Key << "seed" << YAML::Value << tr.seed;
  out << YAML::Key << "scenarios" << YAML::Value << tr.scenarios;
  out << YAML::Key << "duration" << YAML::Value << tr.duration;
  out << YAML::Key << "scenario_seed" << YAML::Value << tr.scenario_seed;
  out << YAML::Key << "noise_scales" << YAML::Value << YAML::Flow << tr.noise_scales;
  out << YAML::Key << "max_delay_ticks" << YAML::Value << tr.max_delay_ticks;
  out << YAML::EndMap;

  const SweepSpec& sw = cfg.sweep;
  out << YAML::Key << "sweep" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "seeds" << YAML::Value << YAML::Flow << sw.seed_list();
  for (const auto& [var, grid] : sw.grids) out << YAML::Key << var << YAML::Value << YAML::Flow << grid;
  out << YAML::EndMap;
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

}  // namespace colloc::sim

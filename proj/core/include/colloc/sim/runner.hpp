#pragma once

#include "colloc/fusion/estimation.hpp"
#include "colloc/fusion/message.hpp"
#include "colloc/sim/channel.hpp"
#include "colloc/sim/scenario.hpp"
#include "colloc/stgl/bundle.hpp"

#include <map>
#include <memory>
#include <optional>
#include <string_view>
#include <tuple>
#include <vector>

namespace colloc::sim {

/// What ends up in the estimate column of the log.
///   full             learned estimate, Kalman update, delayed fusion
///   measurement-only raw measurement z
///   model-only       random-walk Kalman filter with a fixed Q
///   learning-only    ensemble mean without the measurement update
enum class PipelineMode { Full, MeasurementOnly, ModelOnly, LearningOnly };

std::string_view to_string(PipelineMode mode);
std::optional<PipelineMode> parse_pipeline_mode(std::string_view name);

struct PipelineOptions {
  PipelineMode mode = PipelineMode::Full;
  bool collaborate = true;       // exchange estimates with other robots (full mode)
  bool compensate = true;        // roll delayed estimates forward before fusing
  double model_only_q = 0.01;    // m^2 on each axis
  double initial_variance = fusion::kInitialVariance;
  std::size_t history_length = 8;  // overridden by the bundle when one is given
  bool log_channel = true;

  bool needs_models() const { return mode == PipelineMode::Full || mode == PipelineMode::LearningOnly; }
};

/// One estimate of one object by one robot, in that robot's frame.
struct LogRow {
  int tick = 0;
  ObjectId object = 0;
  Vec3 truth = Vec3::Zero();
  Vec3 measured = Vec3::Zero();
  Vec3 learned = Vec3::Zero();
  Vec3 fused = Vec3::Zero();
  double trace_p = 0.0;      // single-robot uncertainty
  double trace_fused = 0.0;  // after fusion

  bool operator==(const LogRow&) const = default;
};

struct RobotLog {
  RobotId robot = 0;
  std::vector<LogRow> rows;
};

/// A message as it left the channel.
struct ChannelRecord {
  int send_tick = 0;
  int deliver_tick = 0;
  RobotId receiver = 0;
  fusion::EstimateMessage message;

  bool operator==(const ChannelRecord&) const = default;
};

struct RunLog {
  PipelineMode mode = PipelineMode::Full;
  double dt = 0.1;
  std::vector<RobotLog> robots;
  std::vector<ChannelRecord> channel;
  std::size_t messages_sent = 0;
  std::size_t messages_undelivered = 0;

  std::size_t row_count() const;
};

/// Tick-by-tick execution of the collaborative localisation pipeline.
/// Each tick: every robot observes, predicts with the learner ensemble,
/// applies the Kalman update and broadcasts; then every robot collects what
/// its channels deliver, compensates the delayed estimates, maps them into
/// its frame and fuses.
class Pipeline {
 public:
  /// `bundle` may be null for the measurement-only and model-only modes.
  Pipeline(const ScenarioConfig& config, const stgl::ModelBundle* bundle, PipelineOptions options = {});
  ~Pipeline();
  Pipeline(Pipeline&&) noexcept;
  Pipeline& operator=(Pipeline&&) noexcept;

  bool done() const;
  int tick() const;
  /// Advances one tick; returns the rows logged during it.
  std::size_t step();
  const World& world() const;
  const RunLog& log() const;
  RunLog take_log();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

RunLog run_scenario(const ScenarioConfig& config, const stgl::ModelBundle* bundle, const PipelineOptions& options = {});

}  // namespace colloc::sim

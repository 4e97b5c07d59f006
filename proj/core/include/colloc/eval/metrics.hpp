#pragma once

#include "colloc/sim/runner.hpp"

#include <span>
#include <vector>

namespace colloc::eval {

/// Lower bound on the range used as the Rel-DE denominator.
inline constexpr double kRangeGuard = 0.1;

struct ObjectMetrics {
  ObjectId object = 0;
  double de = 0.0;
  double rel_de = 0.0;
  std::size_t samples = 0;
};

struct MetricsReport {
  double de = 0.0;      // mean |estimate - truth| over every logged row, metres
  double rel_de = 0.0;  // mean of |estimate - truth| / max(|truth|, guard)
  std::size_t samples = 0;
  std::size_t seeds = 1;
  std::vector<ObjectMetrics> per_object;  // sorted by object id
};

double displacement_error(const Vec3& estimate, const Vec3& truth);
double relative_displacement_error(const Vec3& estimate, const Vec3& truth);

/// Scores the estimate column of a run log. Truth is expressed in the
/// observing robot's frame, so |truth| is the range from that robot.
MetricsReport compute_metrics(const sim::RunLog& log);

/// Seed-level aggregation: DE and Rel-DE are means of the per-run values.
MetricsReport combine_reports(std::span<const MetricsReport> runs);

/// Runs the pipeline in the given mode and scores it. Only the learning-only
/// and full modes need `bundle`.
MetricsReport run_baseline(sim::PipelineMode kind, const sim::ScenarioConfig& config, const stgl::ModelBundle* bundle,
                           sim::PipelineOptions options = {});

}  // namespace colloc::eval

#pragma once

#include "colloc/eval/metrics.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace colloc::eval {

enum class SweepVariable { Latency, Robots, Noise };

std::string_view to_string(SweepVariable v);
std::optional<SweepVariable> parse_sweep_variable(std::string_view name);

/// Copy of `config` with the swept quantity set to `value`: a constant link
/// delay in seconds, the robot count, or the sensor-noise scale.
sim::ScenarioConfig apply_sweep_value(sim::ScenarioConfig config, SweepVariable variable, double value);

struct SweepPoint {
  double x = 0.0;
  double mean_de = 0.0;
  double std_de = 0.0;  // population std over seeds
  std::vector<double> per_seed;
};

struct SweepResult {
  SweepVariable variable = SweepVariable::Latency;
  sim::PipelineMode mode = sim::PipelineMode::Full;
  std::vector<std::uint64_t> seeds;
  std::vector<SweepPoint> points;
  double area = 0.0;  // trapezoid rule over the mean-DE curve

  std::vector<double> xs() const;
  std::vector<double> means() const;
};

inline constexpr std::size_t kMinSweepSeeds = 5;

/// Runs every (grid value, seed) cell and aggregates per grid value. Cells may
/// run on `threads` workers; aggregation order is fixed, so results do not
/// depend on the thread count.
SweepResult sweep(SweepVariable variable, std::span<const double> grid, const sim::ScenarioConfig& config,
                  const stgl::ModelBundle* bundle, std::span<const std::uint64_t> seeds,
                  const sim::PipelineOptions& options = {}, int threads = 1);

double trapezoid_area(std::span<const double> xs, std::span<const double> ys);

/// Least-squares monotone fit (pool-adjacent-violators).
std::vector<double> isotonic_fit(std::span<const double> ys, bool increasing);
/// Largest |y - fit| as a fraction of the curve's range (0 for a flat curve).
double isotonic_residual(std::span<const double> ys, bool increasing);

}  // namespace colloc::eval

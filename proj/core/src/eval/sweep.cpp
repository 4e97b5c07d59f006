#include "colloc/eval/sweep.hpp"

#include "colloc/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <thread>

namespace colloc::eval {

std::string_view to_string(SweepVariable v) {
  switch (v) {
    case SweepVariable::Latency: return "latency";
    case SweepVariable::Robots: return "robots";
    case SweepVariable::Noise: return "noise";
  }
  return "unknown";
}

std::optional<SweepVariable> parse_sweep_variable(std::string_view name) {
  if (name == "latency" || name == "delay") return SweepVariable::Latency;
  if (name == "robots" || name == "robot_count") return SweepVariable::Robots;
  if (name == "noise" || name == "noise_scale") return SweepVariable::Noise;
  return std::nullopt;
}

sim::ScenarioConfig apply_sweep_value(sim::ScenarioConfig config, SweepVariable variable, double value) {
  switch (variable) {
    case SweepVariable::Latency:
      config.latency = sim::LatencySpec::constant(value);
      for (auto& r : config.robots) r.latency = config.latency;
      break;
    case SweepVariable::Robots:
      if (value < 1.0 || value != std::floor(value)) {
        throw ConfigError(fmt::format("sweep: robot count {} is not a positive integer", value));
      }
      if (!config.robots.empty()) throw ConfigError("sweep: cannot vary the robot count of explicit robots");
      config.robot_count = static_cast<int>(value);
      break;
    case SweepVariable::Noise:
      config.noise_scale = value;
      break;
  }
  return config;
}

std::vector<double> SweepResult::xs() const {
  std::vector<double> out;
  for (const auto& p : points) out.push_back(p.x);
  return out;
}

std::vector<double> SweepResult::means() const {
  std::vector<double> out;
  for (const auto& p : points) out.push_back(p.mean_de);
  return out;
}

SweepResult sweep(SweepVariable variable, std::span<const double> grid, const sim::ScenarioConfig& config,
                  const stgl::ModelBundle* bundle, std::span<const std::uint64_t> seeds,
                  const sim::PipelineOptions& options, int threads) {
  if (grid.empty()) throw ConfigError("sweep: empty grid");
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (!(grid[i] > grid[i - 1])) throw ConfigError("sweep: grid must be strictly increasing");
  }
  if (seeds.size() < kMinSweepSeeds) {
    throw ConfigError(fmt::format("sweep: need at least {} seeds, got {}", kMinSweepSeeds, seeds.size()));
  }
  std::vector<sim::ScenarioConfig> cells;
  for (double x : grid) {
    for (std::uint64_t seed : seeds) {
      sim::ScenarioConfig c = apply_sweep_value(config, variable, x);
      c.seed = seed;
      c.validate();
      cells.push_back(std::move(c));
    }
  }

  std::vector<double> de(cells.size());
  std::vector<std::exception_ptr> errors(cells.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      try {
        de[i] = run_baseline(options.mode, cells[i], bundle, options).de;
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const auto n = static_cast<std::size_t>(std::clamp(threads, 1, static_cast<int>(cells.size())));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  SweepResult result;
  result.variable = variable;
  result.mode = options.mode;
  result.seeds.assign(seeds.begin(), seeds.end());
  for (std::size_t g = 0; g < grid.size(); ++g) {
    SweepPoint p;
    p.x = grid[g];
    p.per_seed.assign(de.begin() + static_cast<std::ptrdiff_t>(g * seeds.size()),
                      de.begin() + static_cast<std::ptrdiff_t>((g + 1) * seeds.size()));
    for (double v : p.per_seed) p.mean_de += v;
    p.mean_de /= static_cast<double>(p.per_seed.size());
    for (double v : p.per_seed) p.std_de += (v - p.mean_de) * (v - p.mean_de);
    p.std_de = std::sqrt(p.std_de / static_cast<double>(p.per_seed.size()));
    result.points.push_back(std::move(p));
  }
  const auto xs = result.xs();
  const auto ys = result.means();
  result.area = trapezoid_area(xs, ys);
  return result;
}

double trapezoid_area(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw ShapeError("trapezoid_area: length mismatch");
  double area = 0.0;
  for (std::size_t i = 1; i < xs.size(); ++i) area += 0.5 * (xs[i] - xs[i - 1]) * (ys[i] + ys[i - 1]);
  return area;
}

std::vector<double> isotonic_fit(std::span<const double> ys, bool increasing) {
  struct Block {
    double sum;
    std::size_t count;
    double mean() const { return sum / static_cast<double>(count); }
  };
  const double sign = increasing ? 1.0 : -1.0;
  std::vector<Block> blocks;
  for (double y : ys) {
    blocks.push_back({sign * y, 1});
    while (blocks.size() > 1 && blocks[blocks.size() - 2].mean() > blocks.back().mean()) {
      Block b = blocks.back();
      blocks.pop_back();
      blocks.back().sum += b.sum;
      blocks.back().count += b.count;
    }
  }
  std::vector<double> fit;
  for (const auto& b : blocks) fit.insert(fit.end(), b.count, sign * b.mean());
  return fit;
}

double isotonic_residual(std::span<const double> ys, bool increasing) {
  if (ys.empty()) return 0.0;
  const auto [lo, hi] = std::minmax_element(ys.begin(), ys.end());
  const double range = *hi - *lo;
  if (range <= 0.0) return 0.0;
  const auto fit = isotonic_fit(ys, increasing);
  double worst = 0.0;
  for (std::size_t i = 0; i < ys.size(); ++i) worst = std::max(worst, std::abs(ys[i] - fit[i]));
  return worst / range;
}

}  // namespace colloc::eval

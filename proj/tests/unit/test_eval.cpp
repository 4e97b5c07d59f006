#include "colloc/error.hpp"
#include "colloc/eval/metrics.hpp"
#include "colloc/eval/sweep.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

using namespace colloc;
using namespace colloc::eval;
using sim::PipelineMode;

namespace {

sim::RunLog log_with(const std::vector<std::pair<Vec3, Vec3>>& estimate_truth) {
  sim::RunLog log;
  log.robots.push_back({0, {}});
  int tick = 0;
  for (const auto& [est, truth] : estimate_truth) {
    sim::LogRow row;
    row.tick = tick++;
    row.fused = est;
    row.truth = truth;
    log.robots[0].rows.push_back(row);
  }
  return log;
}

}  // namespace

TEST(Metrics, PerfectEstimates) {
  const auto r = compute_metrics(log_with({{Vec3(1, 2, 3), Vec3(1, 2, 3)}, {Vec3(4, 0, 0), Vec3(4, 0, 0)}}));
  EXPECT_EQ(r.de, 0.0);
  EXPECT_EQ(r.rel_de, 0.0);
  EXPECT_EQ(r.samples, 2u);
}

TEST(Metrics, ConstantOffset) {
  const auto r = compute_metrics(log_with({{Vec3(13, 4, 0), Vec3(10, 0, 0)}, {Vec3(3, 4, 1), Vec3(0, 0, 1)}}));
  EXPECT_NEAR(r.de, 5.0, 1e-12);
}

TEST(Metrics, RelativeError) {
  EXPECT_NEAR(relative_displacement_error(Vec3(55, 0, 0), Vec3(50, 0, 0)), 0.1, 1e-12);
  EXPECT_NEAR(relative_displacement_error(Vec3(0.5, 0, 0), Vec3(0, 0, 0)), 5.0, 1e-12);
  const auto r = compute_metrics(log_with({{Vec3(0, 55, 0), Vec3(0, 50, 0)}}));
  EXPECT_NEAR(r.rel_de, 0.1, 1e-12);
}

TEST(Metrics, EmptyLogRejected) {
  EXPECT_THROW(compute_metrics(sim::RunLog{}), Error);
}

TEST(Metrics, PermutationInvariant) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> d;
  std::vector<std::pair<Vec3, Vec3>> rows;
  for (int i = 0; i < 20; ++i) rows.push_back({Vec3(d(rng), d(rng), d(rng)), Vec3(d(rng), d(rng), d(rng))});
  const auto a = compute_metrics(log_with(rows));
  std::reverse(rows.begin(), rows.end());
  const auto b = compute_metrics(log_with(rows));
  EXPECT_NEAR(a.de, b.de, 1e-12);
  EXPECT_NEAR(a.rel_de, b.rel_de, 1e-12);
}

TEST(Metrics, CombineAveragesRuns) {
  MetricsReport a, b;
  a.de = 1.0;
  a.rel_de = 0.1;
  a.samples = 10;
  b.de = 3.0;
  b.rel_de = 0.3;
  b.samples = 30;
  std::vector<MetricsReport> runs{a, b};
  const auto c = combine_reports(runs);
  EXPECT_DOUBLE_EQ(c.de, 2.0);
  EXPECT_DOUBLE_EQ(c.rel_de, 0.2);
  EXPECT_EQ(c.samples, 40u);
  EXPECT_EQ(c.seeds, 2u);
}

TEST(Baselines, ZeroNoiseIsExact) {
  sim::ScenarioConfig cfg;
  cfg.noise_a = 0.0;
  cfg.noise_b = 0.0;
  cfg.latency = sim::LatencySpec::constant(0.0);
  cfg.duration = 40;
  EXPECT_LT(run_baseline(PipelineMode::MeasurementOnly, cfg, nullptr).de, 1e-6);
  EXPECT_LT(run_baseline(PipelineMode::ModelOnly, cfg, nullptr).de, 1e-6);
}

TEST(Baselines, MeasurementOnlyMatchesNoiseNorm) {
  sim::ScenarioConfig cfg;
  cfg.noise_a = 0.05;
  cfg.noise_b = 0.0;
  cfg.duration = 200;
  const auto r = run_baseline(PipelineMode::MeasurementOnly, cfg, nullptr);
  // Mean norm of an isotropic 3-D Gaussian: sigma * 2 * sqrt(2 / pi).
  const double expected = 0.05 * 2.0 * std::sqrt(2.0 / std::acos(-1.0));
  EXPECT_NEAR(r.de, expected, 0.03 * expected);
}

TEST(Baselines, RequireBundleForLearnedModes) {
  sim::ScenarioConfig cfg;
  cfg.duration = 20;
  EXPECT_THROW(run_baseline(PipelineMode::LearningOnly, cfg, nullptr), Error);
}

TEST(Sweep, TrapezoidArea) {
  std::vector<double> xs{0, 1, 3}, ys{1, 1, 2};
  EXPECT_DOUBLE_EQ(trapezoid_area(xs, ys), 1.0 + 3.0);
  std::vector<double> one{1};
  EXPECT_DOUBLE_EQ(trapezoid_area(one, one), 0.0);
}

TEST(Sweep, IsotonicFit) {
  std::vector<double> ys{1, 3, 2, 4};
  const auto fit = isotonic_fit(ys, true);
  const std::vector<double> want{1, 2.5, 2.5, 4};
  for (std::size_t i = 0; i < fit.size(); ++i) EXPECT_NEAR(fit[i], want[i], 1e-12);
  EXPECT_NEAR(isotonic_residual(ys, true), 0.5 / 3.0, 1e-12);
  std::vector<double> mono{5, 4, 4, 1};
  EXPECT_EQ(isotonic_residual(mono, false), 0.0);
  std::vector<double> flat{2, 2, 2};
  EXPECT_EQ(isotonic_residual(flat, true), 0.0);
}

TEST(Sweep, ApplyValue) {
  sim::ScenarioConfig cfg;
  EXPECT_DOUBLE_EQ(apply_sweep_value(cfg, SweepVariable::Latency, 0.4).latency.max, 0.4);
  EXPECT_EQ(apply_sweep_value(cfg, SweepVariable::Robots, 6).robot_count, 6);
  EXPECT_DOUBLE_EQ(apply_sweep_value(cfg, SweepVariable::Noise, 2.0).noise_scale, 2.0);
  EXPECT_THROW(apply_sweep_value(cfg, SweepVariable::Robots, 2.5), Error);
}

TEST(Sweep, RejectsBadInputs) {
  sim::ScenarioConfig cfg;
  cfg.duration = 20;
  sim::PipelineOptions opt;
  opt.mode = PipelineMode::MeasurementOnly;
  std::vector<std::uint64_t> few{1, 2, 3};
  std::vector<double> grid{1.0, 2.0};
  EXPECT_THROW(sweep(SweepVariable::Noise, grid, cfg, nullptr, few, opt), Error);
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  std::vector<double> bad{2.0, 1.0};
  EXPECT_THROW(sweep(SweepVariable::Noise, bad, cfg, nullptr, seeds, opt), Error);
}

TEST(Sweep, MeanOfMeansAndThreadIndependence) {
  sim::ScenarioConfig cfg;
  cfg.duration = 25;
  cfg.robot_count = 2;
  sim::PipelineOptions opt;
  opt.mode = PipelineMode::ModelOnly;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  std::vector<double> grid{0.5, 1.0, 2.0};
  const auto a = sweep(SweepVariable::Noise, grid, cfg, nullptr, seeds, opt, 1);
  const auto b = sweep(SweepVariable::Noise, grid, cfg, nullptr, seeds, opt, 3);
  ASSERT_EQ(a.points.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(a.points[i].mean_de, b.points[i].mean_de);
    EXPECT_EQ(a.points[i].per_seed.size(), 5u);
    const double m = std::accumulate(a.points[i].per_seed.begin(), a.points[i].per_seed.end(), 0.0) / 5.0;
    EXPECT_NEAR(a.points[i].mean_de, m, 1e-15);
  }
  EXPECT_NEAR(a.area, trapezoid_area(a.xs(), a.means()), 1e-15);
}

TEST(Sweep, MeanOfMeansEqualsGrandMeanForEqualCounts) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> d;
  std::vector<MetricsReport> runs;
  double total = 0.0;
  for (int k = 0; k < 5; ++k) {
    std::vector<std::pair<Vec3, Vec3>> rows;
    for (int i = 0; i < 12; ++i) {
      rows.push_back({Vec3(d(rng), d(rng), d(rng)), Vec3::Zero()});
      total += rows.back().first.norm();
    }
    runs.push_back(compute_metrics(log_with(rows)));
  }
  EXPECT_NEAR(combine_reports(runs).de, total / 60.0, 1e-12);
}

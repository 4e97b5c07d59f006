#include "colloc/eval/metrics.hpp"

#include "colloc/error.hpp"

#include <algorithm>
#include <map>

namespace colloc::eval {

double displacement_error(const Vec3& estimate, const Vec3& truth) { return (estimate - truth).norm(); }

double relative_displacement_error(const Vec3& estimate, const Vec3& truth) {
  return displacement_error(estimate, truth) / std::max(truth.norm(), kRangeGuard);
}

MetricsReport compute_metrics(const sim::RunLog& log) {
  struct Acc {
    double de = 0.0;
    double rel = 0.0;
    std::size_t n = 0;
  };
  std::map<ObjectId, Acc> by_object;
  Acc total;
  for (const auto& robot : log.robots) {
    for (const auto& row : robot.rows) {
      const double de = displacement_error(row.fused, row.truth);
      const double rel = relative_displacement_error(row.fused, row.truth);
      auto& a = by_object[row.object];
      a.de += de;
      a.rel += rel;
      ++a.n;
      total.de += de;
      total.rel += rel;
      ++total.n;
    }
  }
  if (total.n == 0) throw Error("compute_metrics: the run log has no rows");
  MetricsReport report;
  report.samples = total.n;
  report.de = total.de / static_cast<double>(total.n);
  report.rel_de = total.rel / static_cast<double>(total.n);
  for (const auto& [id, a] : by_object) {
    report.per_object.push_back({id, a.de / static_cast<double>(a.n), a.rel / static_cast<double>(a.n), a.n});
  }
  return report;
}

MetricsReport combine_reports(std::span<const MetricsReport> runs) {
  if (runs.empty()) throw Error("combine_reports: no runs");
  MetricsReport out;
  out.seeds = 0;
  std::map<ObjectId, ObjectMetrics> objects;
  std::map<ObjectId, std::size_t> object_runs;
  for (const auto& r : runs) {
    out.de += r.de;
    out.rel_de += r.rel_de;
    out.samples += r.samples;
    out.seeds += r.seeds;
    for (const auto& o : r.per_object) {
      auto& m = objects[o.object];
      m.object = o.object;
      m.de += o.de;
      m.rel_de += o.rel_de;
      m.samples += o.samples;
      ++object_runs[o.object];
    }
  }
  out.de /= static_cast<double>(runs.size());
  out.rel_de /= static_cast<double>(runs.size());
  for (auto& [id, m] : objects) {
    m.de /= static_cast<double>(object_runs[id]);
    m.rel_de /= static_cast<double>(object_runs[id]);
    out.per_object.push_back(m);
  }
  return out;
}

MetricsReport run_baseline(sim::PipelineMode kind, const sim::ScenarioConfig& config, const stgl::ModelBundle* bundle,
                           sim::PipelineOptions options) {
  options.mode = kind;
  options.log_channel = false;
  return compute_metrics(sim::run_scenario(config, bundle, options));
}

}  // namespace colloc::eval

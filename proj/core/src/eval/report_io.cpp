#include "colloc/eval/report_io.hpp"

#include "colloc/io.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include <ostream>

namespace colloc::eval {

namespace {

nlohmann::json to_json(const MetricsReport& r) {
  nlohmann::json j;
  j["de"] = r.de;
  j["rel_de"] = r.rel_de;
  j["samples"] = r.samples;
  j["seeds"] = r.seeds;
  j["per_object"] = nlohmann::json::array();
  for (const auto& o : r.per_object) {
    j["per_object"].push_back({{"object", o.object}, {"de", o.de}, {"rel_de", o.rel_de}, {"samples", o.samples}});
  }
  return j;
}

nlohmann::json to_json(const SweepResult& r) {
  nlohmann::json j;
  j["variable"] = std::string(to_string(r.variable));
  j["mode"] = std::string(sim::to_string(r.mode));
  j["seeds"] = r.seeds;
  j["area"] = r.area;
  j["points"] = nlohmann::json::array();
  for (const auto& p : r.points) {
    j["points"].push_back({{"x", p.x}, {"mean_de", p.mean_de}, {"std_de", p.std_de}, {"per_seed", p.per_seed}});
  }
  return j;
}

}  // namespace

std::string metrics_json(const MetricsReport& report, int indent) { return to_json(report).dump(indent); }

std::string sweep_json(const SweepResult& result, int indent) { return to_json(result).dump(indent); }

void write_curve_csv(std::ostream& out, const SweepResult& result) {
  out << "x,mean_de,std_de\n";
  for (const auto& p : result.points) out << fmt::format("{},{},{}\n", p.x, p.mean_de, p.std_de);
}

void save_metrics(const std::filesystem::path& path, const MetricsReport& report) {
  write_file_atomic(path, metrics_json(report) + "\n");
}

void save_sweep(const std::filesystem::path& stem, const SweepResult& result) {
  auto json_path = stem;
  json_path += ".json";
  auto csv_path = stem;
  csv_path += ".csv";
  write_file_atomic(json_path, sweep_json(result) + "\n");
  write_file_atomic(csv_path, [&](std::ostream& out) { write_curve_csv(out, result); });
}

}  // namespace colloc::eval

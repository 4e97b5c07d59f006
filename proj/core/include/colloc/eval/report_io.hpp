#pragma once

#include "colloc/eval/metrics.hpp"
#include "colloc/eval/sweep.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>

namespace colloc::eval {

/// JSON records, reals printed round-trip exact.
std::string metrics_json(const MetricsReport& report, int indent = 2);
std::string sweep_json(const SweepResult& result, int indent = 2);

/// Plot-ready curve: header `x,mean_de,std_de`, one row per grid value.
void write_curve_csv(std::ostream& out, const SweepResult& result);

void save_metrics(const std::filesystem::path& path, const MetricsReport& report);
/// Writes <stem>.json and <stem>.csv.
void save_sweep(const std::filesystem::path& stem, const SweepResult& result);

}  // namespace colloc::eval

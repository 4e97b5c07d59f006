#pragma once

#include "colloc/sim/datasets.hpp"
#include "colloc/sim/runner.hpp"
#include "colloc/sim/scenario.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace colloc::sim {

struct SweepSpec {
  std::size_t seed_count = 5;
  std::uint64_t seed_base = 1;
  std::vector<std::uint64_t> seeds;  // explicit list; overrides count/base
  std::map<std::string, std::vector<double>> grids{
      {"latency", {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7}},
      {"robots", {1, 2, 3, 4, 5, 6}},
      {"noise", {0.5, 1.0, 2.0, 3.0, 4.0}},
  };

  std::vector<std::uint64_t> seed_list() const;
};

/// Everything a config file can hold. Missing keys keep these defaults.
struct ProjectConfig {
  ScenarioConfig scenario;
  PipelineOptions pipeline;
  TrainingSpec training;
  SweepSpec sweep;
};

/// Parses YAML text. Every problem is collected and thrown together in one
/// ConfigError, each prefixed with its line and key.
ProjectConfig parse_config(const std::string& text);
/// Like parse_config, but returns the problems instead of throwing.
ProjectConfig parse_config(const std::string& text, std::vector<std::string>& errors);
ProjectConfig validate_config(const std::filesystem::path& path);

/// Normalised YAML with every default spelled out.
std::string dump_config(const ProjectConfig& config);

}  // namespace colloc::sim

#pragma once

#include "colloc/sim/scenario.hpp"
#include "colloc/stgl/bundle.hpp"
#include "colloc/stgl/train.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace colloc::sim {

/// How the learner and compensation ensembles are trained. Training worlds are
/// copies of the base scenario with seeds starting at `scenario_seed`, so they
/// never coincide with evaluation seeds below it.
struct TrainingSpec {
  int ensemble_size = 5;
  int epochs = 12;
  int compensator_epochs = 12;
  double learning_rate = 1e-3;
  std::size_t batch_size = 16;
  std::size_t history_length = 8;
  std::uint64_t seed = 0;
  int scenarios = 6;
  int duration = 100;
  std::uint64_t scenario_seed = 100000;
  std::vector<double> noise_scales{0.5, 1.0, 2.0, 4.0};
  int max_delay_ticks = 7;

  stgl::TrainConfig learner_config(int threads) const;
  stgl::TrainConfig compensator_config(int threads) const;
  std::vector<std::string> errors() const;
};

/// The worlds used for training, derived from `base`.
std::vector<ScenarioConfig> training_scenarios(const ScenarioConfig& base, const TrainingSpec& spec);

/// One-step samples from every robot's measurement history: the trailing
/// window before tick t and the true positions at t, in the robot's frame.
std::vector<stgl::TrainSample> learner_samples(const ScenarioConfig& scenario, std::size_t history_length);

/// Samples for the compensation ensemble: windows of a robot's own
/// single-robot posterior estimates ending at tick L, with the truth at L + D
/// for a random D in 1..max_delay_ticks.
std::vector<stgl::TrainSample> compensator_samples(const ScenarioConfig& scenario, const stgl::ModelBundle& learner,
                                                   int max_delay_ticks, std::uint64_t seed);

struct TrainingReport {
  std::vector<stgl::TrainedMember> learner;
  std::vector<stgl::TrainedMember> compensator;
  std::size_t learner_samples = 0;
  std::size_t compensator_samples = 0;
};

using ProgressFn = std::function<void(const std::string&)>;

/// Builds both datasets and trains both ensembles.
stgl::ModelBundle train_bundle(const ScenarioConfig& base, const TrainingSpec& spec, int threads = 1,
                               TrainingReport* report = nullptr, const ProgressFn& progress = {});

}  // namespace colloc::sim

#include "colloc/sim/datasets.hpp"

#include "colloc/error.hpp"
#include "colloc/sim/runner.hpp"

#include <fmt/format.h>

#include <map>

namespace colloc::sim {

stgl::TrainConfig TrainingSpec::learner_config(int threads) const {
  stgl::TrainConfig c;
  c.ensemble_size = ensemble_size;
  c.epochs = epochs;
  c.learning_rate = learning_rate;
  c.seed = seed;
  c.history_length = history_length;
  c.batch_size = batch_size;
  c.threads = threads;
  return c;
}

stgl::TrainConfig TrainingSpec::compensator_config(int threads) const {
  stgl::TrainConfig c = learner_config(threads);
  c.epochs = compensator_epochs;
  c.seed = derive_seed(seed, 0xC0);
  return c;
}

std::vector<std::string> TrainingSpec::errors() const {
  std::vector<std::string> e;
  if (ensemble_size < 1) e.push_back(fmt::format("training.ensemble_size: must be >= 1 (got {})", ensemble_size));
  if (epochs < 0) e.push_back("training.epochs: must be >= 0");
  if (compensator_epochs < 0) e.push_back("training.compensator_epochs: must be >= 0");
  if (!(learning_rate > 0.0)) e.push_back("training.learning_rate: must be positive");
  if (batch_size < 1) e.push_back("training.batch_size: must be >= 1");
  if (history_length < 3) e.push_back("training.history_length: must be >= 3");
  if (scenarios < 1) e.push_back("training.scenarios: must be >= 1");
  if (duration < static_cast<int>(history_length) + 2) {
    e.push_back(fmt::format("training.duration: must be >= history_length + 2 (got {})", duration));
  }
  if (noise_scales.empty()) e.push_back("training.noise_scales: must not be empty");
  for (double s : noise_scales) {
    if (!(s >= 0.0)) e.push_back(fmt::format("training.noise_scales: {} is negative", s));
  }
  if (max_delay_ticks < 1) e.push_back("training.max_delay_ticks: must be >= 1");
  return e;
}

std::vector<ScenarioConfig> training_scenarios(const ScenarioConfig& base, const TrainingSpec& spec) {
  std::vector<ScenarioConfig> out;
  for (int i = 0; i < spec.scenarios; ++i) {
    ScenarioConfig c = base;
    c.seed = spec.scenario_seed + static_cast<std::uint64_t>(i);
    c.duration = spec.duration;
    c.noise_scale = spec.noise_scales[static_cast<std::size_t>(i) % spec.noise_scales.size()];
    c.occlusions.clear();
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<stgl::TrainSample> learner_samples(const ScenarioConfig& scenario, std::size_t history_length) {
  const World world = generate_scenario(scenario);
  std::vector<stgl::TrainSample> out;
  for (std::size_t r = 0; r < world.robots.size(); ++r) {
    // Same noise stream as the pipeline uses for this robot.
    std::mt19937_64 rng(derive_seed(scenario.seed, 100, static_cast<std::uint64_t>(world.robots[r].id)));
    stgl::SpatioTemporalGraph history;
    history.dt = scenario.dt;
    for (int t = 0; t < scenario.duration; ++t) {
      stgl::ObservationGraph obs = observe(world.trajectories, world.robots[r], t, scenario.dt, rng, scenario.occlusions);
      if (history.size() >= history_length) {
        std::map<ObjectId, Vec3> truth;
        for (std::size_t o = 0; o < world.trajectories.size(); ++o) {
          if (obs.index_of(world.trajectories[o].id)) truth[world.trajectories[o].id] = world.truth_in_robot(r, o, t);
        }
        if (auto s = stgl::make_sample(history, truth, history_length, 1)) out.push_back(std::move(*s));
      }
      history.push(std::move(obs));
      history.trim(history_length);
    }
  }
  return out;
}

std::vector<stgl::TrainSample> compensator_samples(const ScenarioConfig& scenario, const stgl::ModelBundle& learner,
                                                   int max_delay_ticks, std::uint64_t seed) {
  PipelineOptions options;
  options.mode = PipelineMode::Full;
  options.collaborate = false;
  options.log_channel = false;
  const RunLog log = run_scenario(scenario, &learner, options);
  const World world = generate_scenario(scenario);
  std::map<ObjectId, std::size_t> index;
  for (std::size_t o = 0; o < world.trajectories.size(); ++o) index[world.trajectories[o].id] = o;

  const std::size_t T = learner.history_length;
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> pick(1, max_delay_ticks);
  std::vector<stgl::TrainSample> out;
  for (std::size_t r = 0; r < log.robots.size(); ++r) {
    std::map<int, stgl::ObservationGraph> beliefs;
    for (const auto& row : log.robots[r].rows) {
      auto& g = beliefs[row.tick];
      g.timestamp = row.tick * scenario.dt;
      g.add(row.object, row.fused, Mat3::Identity());
    }
    stgl::SpatioTemporalGraph history;
    history.dt = scenario.dt;
    for (int t = 0; t < scenario.duration; ++t) {
      auto it = beliefs.find(t);
      if (it == beliefs.end()) {
        history.graphs.clear();
        continue;
      }
      it->second.connect_all();
      history.push(std::move(it->second));
      history.trim(T);
      const int delay = pick(rng);
      if (history.size() < T || t + delay >= scenario.duration) continue;
      std::map<ObjectId, Vec3> truth;
      for (const auto& id : history.latest().ids) truth[id] = world.truth_in_robot(r, index.at(id), t + delay);
      if (auto s = stgl::make_sample(history, truth, T, delay)) out.push_back(std::move(*s));
    }
  }
  return out;
}

stgl::ModelBundle train_bundle(const ScenarioConfig& base, const TrainingSpec& spec, int threads,
                               TrainingReport* report, const ProgressFn& progress) {
  if (auto e = spec.errors(); !e.empty()) {
    std::string msg = "invalid training spec:";
    for (const auto& s : e) msg += "\n  " + s;
    throw ConfigError(msg);
  }
  auto say = [&](const std::string& s) {
    if (progress) progress(s);
  };
  const auto worlds = training_scenarios(base, spec);

  std::vector<stgl::TrainSample> data;
  for (const auto& w : worlds) {
    auto s = learner_samples(w, spec.history_length);
    data.insert(data.end(), std::make_move_iterator(s.begin()), std::make_move_iterator(s.end()));
  }
  say(fmt::format("learner: {} samples from {} scenarios", data.size(), worlds.size()));
  const auto learner = stgl::train_ensemble(data, spec.learner_config(threads));

  stgl::ModelBundle bundle;
  bundle.history_length = spec.history_length;
  for (const auto& m : learner) bundle.learner.push_back(m.model);
  bundle.dims = bundle.learner.front().dims();
  bundle.input_scale = bundle.learner.front().input_scale();
  // Placeholder; single-robot runs never touch the compensator.
  bundle.compensator = bundle.learner;
  for (std::size_t k = 0; k < learner.size(); ++k) {
    say(fmt::format("learner member {}: nll {:.4f} -> {:.4f}", k, learner[k].initial_loss, learner[k].final_loss));
  }

  std::vector<stgl::TrainSample> comp_data;
  for (std::size_t i = 0; i < worlds.size(); ++i) {
    auto s = compensator_samples(worlds[i], bundle, spec.max_delay_ticks, derive_seed(spec.seed, 300, i));
    comp_data.insert(comp_data.end(), std::make_move_iterator(s.begin()), std::make_move_iterator(s.end()));
  }
  say(fmt::format("compensator: {} samples", comp_data.size()));
  const auto compensator = stgl::train_ensemble(comp_data, spec.compensator_config(threads));
  for (std::size_t k = 0; k < compensator.size(); ++k) {
    say(fmt::format("compensator member {}: nll {:.4f} -> {:.4f}", k, compensator[k].initial_loss,
                    compensator[k].final_loss));
  }
  bundle.compensator.clear();
  for (const auto& m : compensator) bundle.compensator.push_back(m.model);
  if (report != nullptr) {
    report->learner = learner;
    report->compensator = compensator;
    report->learner_samples = data.size();
    report->compensator_samples = comp_data.size();
  }
  bundle.validate();
  return bundle;
}

}  // namespace colloc::sim

#include "colloc/sim/runner.hpp"

#include "colloc/error.hpp"
#include "colloc/stgl/ensemble.hpp"

#include <fmt/format.h>

#include <algorithm>

namespace colloc::sim {

std::string_view to_string(PipelineMode mode) {
  switch (mode) {
    case PipelineMode::Full: return "full";
    case PipelineMode::MeasurementOnly: return "measurement-only";
    case PipelineMode::ModelOnly: return "model-only";
    case PipelineMode::LearningOnly: return "learning-only";
  }
  return "unknown";
}

std::optional<PipelineMode> parse_pipeline_mode(std::string_view name) {
  if (name == "full") return PipelineMode::Full;
  if (name == "measurement-only" || name == "measurement") return PipelineMode::MeasurementOnly;
  if (name == "model-only" || name == "model") return PipelineMode::ModelOnly;
  if (name == "learning-only" || name == "learning") return PipelineMode::LearningOnly;
  return std::nullopt;
}

std::size_t RunLog::row_count() const {
  std::size_t n = 0;
  for (const auto& r : robots) n += r.rows.size();
  return n;
}

namespace {

using CompensationList = std::vector<std::pair<ObjectId, fusion::Compensation>>;

struct RobotState {
  std::mt19937_64 rng;
  stgl::SpatioTemporalGraph observations;
  std::map<ObjectId, fusion::StateBelief> beliefs;
  // sender -> send tick -> that sender's posterior beliefs
  std::map<RobotId, std::map<int, stgl::ObservationGraph>> received;
};

struct Pending {
  LogRow row;
  Mat3 P = Mat3::Identity();
};

const fusion::Compensation* find(const CompensationList& list, ObjectId id) {
  for (const auto& [oid, c] : list) {
    if (oid == id) return &c;
  }
  return nullptr;
}

}  // namespace

struct Pipeline::Impl {
  World world;
  const stgl::ModelBundle* bundle = nullptr;
  PipelineOptions options;
  std::size_t T = 8;
  int tick = 0;
  std::vector<RobotState> robots;
  std::map<ObjectId, std::size_t> object_index;
  // channels[s][r] carries robot s's broadcasts to robot r
  std::vector<std::vector<std::unique_ptr<LatencyChannel>>> channels;
  // to_local[r][s] maps robot s's frame into robot r's
  std::vector<std::vector<fusion::FrameTransform>> to_local;
  // (sender, send tick, delay ticks) -> compensated estimates; identical for every receiver
  std::map<std::tuple<std::size_t, int, int>, CompensationList> cache;
  RunLog log;

  Impl(const ScenarioConfig& config, const stgl::ModelBundle* b, PipelineOptions opts)
      : world(generate_scenario(config)), bundle(b), options(opts) {
    if (options.needs_models()) {
      if (bundle == nullptr) {
        throw ConfigError(fmt::format("pipeline: mode '{}' needs a model bundle", to_string(options.mode)));
      }
      bundle->validate();
      options.history_length = bundle->history_length;
    }
    if (options.history_length < 3) throw ConfigError("pipeline: history length must be >= 3");
    if (!(options.initial_variance > 0.0)) throw ConfigError("pipeline: initial variance must be positive");
    if (options.model_only_q < 0.0) throw ConfigError("pipeline: model-only Q must be >= 0");
    T = options.history_length;

    const std::size_t n = world.robots.size();
    for (std::size_t i = 0; i < world.trajectories.size(); ++i) object_index[world.trajectories[i].id] = i;
    for (std::size_t r = 0; r < n; ++r) {
      RobotState state;
      state.rng.seed(derive_seed(config.seed, 100, static_cast<std::uint64_t>(world.robots[r].id)));
      state.observations.dt = config.dt;
      robots.push_back(std::move(state));
    }
    channels.resize(n);
    to_local.resize(n);
    for (std::size_t s = 0; s < n; ++s) {
      channels[s].resize(n);
      for (std::size_t r = 0; r < n; ++r) {
        to_local[s].push_back(world.robots[s].extrinsics.inverse().compose(world.robots[r].extrinsics));
        if (r == s) continue;
        channels[s][r] = std::make_unique<LatencyChannel>(
            world.robots[s].id, world.robots[r].id, world.robots[s].latency, config.dt,
            derive_seed(config.seed, 200, static_cast<std::uint64_t>(s), static_cast<std::uint64_t>(r)));
      }
    }
    log.mode = options.mode;
    log.dt = config.dt;
    for (const auto& r : world.robots) log.robots.push_back({r.id, {}});
  }

  bool collaborating() const { return options.mode == PipelineMode::Full && options.collaborate; }

  const CompensationList& compensation(std::size_t receiver, std::size_t sender, int sent, int delay) {
    auto key = std::make_tuple(sender, sent, delay);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    const auto& received = robots[receiver].received[world.robots[sender].id];
    CompensationList result;
    stgl::SpatioTemporalGraph history;
    history.dt = world.config.dt;
    bool complete = delay == 0;
    if (!complete && sent + 1 >= static_cast<int>(T)) {
      complete = true;
      for (int k = sent + 1 - static_cast<int>(T); k <= sent; ++k) {
        auto g = received.find(k);
        if (g == received.end()) {
          complete = false;
          break;
        }
        history.graphs.push_back(g->second);
      }
    }
    if (delay == 0) history.graphs.push_back(received.at(sent));
    if (complete) {
      result = fusion::compensate_delay_all(bundle->compensator, history, delay * world.config.dt,
                                            world.config.dt, T);
    }
    return cache.emplace(key, std::move(result)).first->second;
  }

  std::size_t step() {
    if (tick >= world.config.duration) throw StateError("pipeline: scenario already finished");
    const double dt = world.config.dt;
    const double now = tick * dt;
    const std::size_t n = robots.size();
    std::vector<std::vector<Pending>> pending(n);

    for (std::size_t r = 0; r < n; ++r) {
      RobotState& state = robots[r];
      const RobotSensorModel& sensor = world.robots[r];
      stgl::ObservationGraph obs =
          observe(world.trajectories, sensor, tick, dt, state.rng, world.config.occlusions);

      const stgl::WindowBatch window = stgl::extract_window(state.observations, T);
      std::vector<stgl::ObjectEnsemble> learned;
      if (options.needs_models() && window.objects() > 0) {
        learned = stgl::ensemble_predict_all(bundle->learner, window, 1);
      }

      std::vector<fusion::EstimateMessage> outgoing;
      for (std::size_t i = 0; i < obs.size(); ++i) {
        const ObjectId id = obs.ids[i];
        const fusion::Measurement z{obs.positions[i], obs.covariances[i], now};
        auto prior_it = state.beliefs.find(id);
        const fusion::StateBelief prior = prior_it != state.beliefs.end()
                                              ? prior_it->second
                                              : fusion::initial_belief(id, sensor.id, now, options.initial_variance);
        const stgl::ObjectEnsemble* pred = nullptr;
        for (const auto& e : learned) {
          if (e.id == id) pred = &e;
        }
        const bool in_window = std::find(window.ids.begin(), window.ids.end(), id) != window.ids.end();

        fusion::StateBelief post;
        switch (options.mode) {
          case PipelineMode::Full:
          case PipelineMode::LearningOnly:
            if (pred != nullptr) {
              post = fusion::predict_and_update(prior, pred->output.process_noise, pred->output.mean, z);
            } else {
              const auto fresh = fusion::initial_belief(id, sensor.id, now, options.initial_variance);
              post = fusion::predict_and_update(fresh, Mat3::Zero(), fresh.x, z);
            }
            break;
          case PipelineMode::ModelOnly:
            post = fusion::predict_and_update(prior, options.model_only_q * Mat3::Identity(), prior.x, z);
            break;
          case PipelineMode::MeasurementOnly:
            post = prior;
            post.x = z.z;
            post.P = z.R;
            post.timestamp = now;
            break;
        }
        post.object_id = id;
        post.robot_id = sensor.id;
        state.beliefs[id] = post;
        if (collaborating()) {
          outgoing.push_back({sensor.id, id, now, post.x, fusion::EstimateMessage::pack(post.P), sensor.id});
        }

        if (!in_window || (options.needs_models() && pred == nullptr)) continue;
        Pending p;
        p.row.tick = tick;
        p.row.object = id;
        p.row.truth = world.truth_in_robot(r, object_index.at(id), tick);
        p.row.measured = z.z;
        p.row.learned = pred != nullptr ? pred->output.mean : post.x;
        p.P = post.P;
        p.row.fused = post.x;
        p.row.trace_p = post.P.trace();
        if (options.mode == PipelineMode::LearningOnly) {
          p.row.fused = pred->output.mean;
          p.row.trace_p = pred->output.covariance.trace();
        }
        p.row.trace_fused = p.row.trace_p;
        pending[r].push_back(p);
      }

      state.observations.push(std::move(obs));
      state.observations.trim(T);

      if (collaborating()) {
        for (std::size_t s = 0; s < n; ++s) {
          if (s == r) continue;
          channels[r][s]->send(tick, outgoing);
          log.messages_sent += outgoing.size();
        }
      }
    }

    if (collaborating()) {
      for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t s = 0; s < n; ++s) {
          if (s == r) continue;
          for (auto& packet : channels[s][r]->deliver(tick)) {
            stgl::ObservationGraph g;
            g.timestamp = packet.send_tick * dt;
            for (const auto& m : packet.messages) {
              g.add(m.object_id, m.x, m.covariance());
              if (options.log_channel) log.channel.push_back({packet.send_tick, tick, world.robots[r].id, m});
            }
            g.connect_all();
            auto& inbox = robots[r].received[world.robots[s].id];
            inbox[packet.send_tick] = std::move(g);
            while (!inbox.empty() && inbox.begin()->first < packet.send_tick - static_cast<int>(T) - 1) {
              inbox.erase(inbox.begin());
            }
          }
        }
        fuse(r, pending[r]);
      }
      std::erase_if(cache, [&](const auto& entry) { return std::get<1>(entry.first) < tick - 16; });
    }

    std::size_t rows = 0;
    for (std::size_t r = 0; r < n; ++r) {
      for (auto& p : pending[r]) log.robots[r].rows.push_back(p.row);
      rows += pending[r].size();
    }
    ++tick;
    if (tick == world.config.duration) {
      log.messages_undelivered = 0;
      for (const auto& row : channels) {
        for (const auto& c : row) {
          if (c) log.messages_undelivered += c->in_flight_messages();
        }
      }
    }
    return rows;
  }

  void fuse(std::size_t r, std::vector<Pending>& rows) {
    const std::size_t n = robots.size();
    for (auto& p : rows) {
      const fusion::CompensatedEstimate own{p.row.fused, p.P};
      std::vector<fusion::RemoteEstimate> remote;
      for (std::size_t s = 0; s < n; ++s) {
        if (s == r) continue;
        const auto& inbox = robots[r].received[world.robots[s].id];
        if (inbox.empty()) continue;
        const auto& [sent, graph] = *inbox.rbegin();
        const auto idx = graph.index_of(p.row.object);
        if (!idx) continue;
        fusion::CompensatedEstimate est{graph.positions[*idx], graph.covariances[*idx]};
        if (options.compensate) {
          const auto* c = find(compensation(r, s, sent, tick - sent), p.row.object);
          if (c == nullptr) continue;
          est.x = c->x;
          est.P = fusion::compensated_uncertainty(est.P, c->Q);
        }
        remote.push_back({est, to_local[r][s]});
      }
      const auto fused = fusion::fuse_states(own, remote);
      p.row.fused = fused.x;
      p.row.trace_fused = fused.P.trace();
    }
  }
};

Pipeline::Pipeline(const ScenarioConfig& config, const stgl::ModelBundle* bundle, PipelineOptions options)
    : impl_(std::make_unique<Impl>(config, bundle, options)) {}
Pipeline::~Pipeline() = default;
Pipeline::Pipeline(Pipeline&&) noexcept = default;
Pipeline& Pipeline::operator=(Pipeline&&) noexcept = default;

bool Pipeline::done() const { return impl_->tick >= impl_->world.config.duration; }
int Pipeline::tick() const { return impl_->tick; }
std::size_t Pipeline::step() { return impl_->step(); }
const World& Pipeline::world() const { return impl_->world; }
const RunLog& Pipeline::log() const { return impl_->log; }
RunLog Pipeline::take_log() { return std::move(impl_->log); }

RunLog run_scenario(const ScenarioConfig& config, const stgl::ModelBundle* bundle, const PipelineOptions& options) {
  Pipeline pipeline(config, bundle, options);
  while (!pipeline.done()) pipeline.step();
  return pipeline.take_log();
}

}  // namespace colloc::sim

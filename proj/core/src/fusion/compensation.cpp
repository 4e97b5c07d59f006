#include "colloc/error.hpp"
#include "colloc/fusion/estimation.hpp"

#include <fmt/format.h>

#include <cmath>

namespace colloc::fusion {

int delay_ticks(double delta_t, double dt) {
  if (!(dt > 0.0)) throw Error("delay: dt must be positive");
  if (delta_t < 0.0) throw Error(fmt::format("delay: negative delay {} s", delta_t));
  const double ticks = delta_t / dt;
  const double rounded = std::round(ticks);
  if (std::abs(ticks - rounded) > 1e-6) {
    throw Error(fmt::format("delay: {} s is not a multiple of the {} s tick", delta_t, dt));
  }
  return static_cast<int>(rounded);
}

std::vector<std::pair<ObjectId, Compensation>> compensate_delay_all(std::span<const stgl::StglModel> models,
                                                                    const stgl::SpatioTemporalGraph& beliefs,
                                                                    double delta_t, double dt,
                                                                    std::size_t history_length) {
  const int steps = delay_ticks(delta_t, dt);
  std::vector<std::pair<ObjectId, Compensation>> out;
  if (beliefs.empty()) return out;
  if (steps == 0) {
    const auto& latest = beliefs.latest();
    for (std::size_t i = 0; i < latest.size(); ++i) out.push_back({latest.ids[i], {latest.positions[i], Mat3::Zero()}});
    return out;
  }
  for (const auto& entry : stgl::ensemble_predict_all(models, beliefs, history_length, steps)) {
    out.push_back({entry.id, {entry.output.mean, entry.output.process_noise}});
  }
  return out;
}

Compensation compensate_delay(std::span<const stgl::StglModel> models, std::span<const StateBelief> history,
                              double delta_t, double dt, std::size_t history_length) {
  if (history.empty()) throw Error("compensate_delay: empty belief history");
  const int steps = delay_ticks(delta_t, dt);
  if (steps == 0) return {history.back().x, Mat3::Zero()};
  if (history.size() < history_length) {
    throw Error(fmt::format("compensate_delay: {} beliefs, need {}", history.size(), history_length));
  }
  stgl::SpatioTemporalGraph graph;
  graph.dt = dt;
  const ObjectId id = history.back().object_id;
  for (std::size_t i = history.size() - history_length; i < history.size(); ++i) {
    stgl::ObservationGraph g;
    g.timestamp = history.front().timestamp + static_cast<double>(i) * dt;
    g.add(id, history[i].x, history[i].P);
    g.connect_all();
    graph.graphs.push_back(std::move(g));
  }
  auto all = compensate_delay_all(models, graph, delta_t, dt, history_length);
  return all.front().second;
}

}  // namespace colloc::fusion

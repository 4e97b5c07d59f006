#include "colloc/stgl/ensemble.hpp"

#include "colloc/error.hpp"

#include <fmt/format.h>

namespace colloc::stgl {

EnsembleOutput combine_members(std::span<const GaussianEstimate> members) {
  if (members.empty()) throw Error("ensemble: no members");
  const double k = static_cast<double>(members.size());
  const GaussianEstimate& ref = members.front();

  Vec3 mean_offset = Vec3::Zero();
  Mat3 cov_offset = Mat3::Zero();
  for (const auto& m : members) {
    mean_offset += m.mean - ref.mean;
    cov_offset += m.covariance - ref.covariance;
  }
  EnsembleOutput out;
  out.mean = ref.mean + mean_offset / k;
  out.data_uncertainty = ref.covariance + cov_offset / k;

  Vec3 spread = Vec3::Zero();
  Mat3 second_moment = Mat3::Zero();
  for (const auto& m : members) {
    const Vec3 d = m.mean - out.mean;
    spread += d.cwiseAbs2();
    second_moment += d * d.transpose();
  }
  out.model_uncertainty = (spread / k).asDiagonal();
  out.process_noise = out.data_uncertainty + out.model_uncertainty;
  out.covariance = out.data_uncertainty + second_moment / k;
  return out;
}

std::vector<ObjectEnsemble> ensemble_predict_all(std::span<const StglModel> models, const WindowBatch& window,
                                                 int steps) {
  if (models.empty()) throw Error("ensemble_predict: empty model list");
  for (const auto& m : models) {
    if (!(m.dims() == models.front().dims())) throw ShapeError("ensemble_predict: members differ in architecture");
  }
  std::vector<ObjectEnsemble> out;
  if (window.objects() == 0) return out;
  std::vector<std::vector<ObjectPrediction>> per_member;
  per_member.reserve(models.size());
  for (const auto& m : models) per_member.push_back(rollout(m, window, steps));

  std::vector<GaussianEstimate> members(models.size());
  for (std::size_t i = 0; i < window.objects(); ++i) {
    for (std::size_t k = 0; k < models.size(); ++k) members[k] = per_member[k][i].steps.back();
    out.push_back({window.ids[i], combine_members(members)});
  }
  return out;
}

std::vector<ObjectEnsemble> ensemble_predict_all(std::span<const StglModel> models,
                                                 const SpatioTemporalGraph& history, std::size_t history_length,
                                                 int steps) {
  if (history_length < 3) throw Error("ensemble_predict: history length must be >= 3");
  return ensemble_predict_all(models, extract_window(history, history_length), steps);
}

EnsembleOutput ensemble_predict(std::span<const StglModel> models, const SpatioTemporalGraph& history, ObjectId id,
                                std::size_t history_length) {
  auto all = ensemble_predict_all(models, history, history_length, 1);
  for (auto& entry : all) {
    if (entry.id == id) return entry.output;
  }
  throw Error(fmt::format("ensemble_predict: object {} not present over the last {} ticks", id, history_length));
}

}  // namespace colloc::stgl

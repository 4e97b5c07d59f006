#pragma once

#include "colloc/stgl/graph.hpp"
#include "colloc/stgl/model.hpp"

#include <span>
#include <vector>

namespace colloc::stgl {

/// Deep-ensemble summary of K member predictions.
struct EnsembleOutput {
  Vec3 mean = Vec3::Zero();              // mu_p, average of member means
  Mat3 covariance = Mat3::Zero();        // Sigma_p, moment-matched mixture covariance
  Mat3 process_noise = Mat3::Zero();     // Q = data term + diagonal model term
  Mat3 data_uncertainty = Mat3::Zero();  // mean of member covariances
  Mat3 model_uncertainty = Mat3::Zero(); // mean diag(mu_k)^2 - diag(mu_p)^2
};

/// Combines member Gaussians. Averages are taken as offsets from the first
/// member, so identical members reproduce it bit-exactly and the model term is
/// exactly zero. The model term uses the equivalent centred form
/// (1/K) sum (mu_k - mu_p)^2 on the diagonal, which is never negative.
EnsembleOutput combine_members(std::span<const GaussianEstimate> members);

struct ObjectEnsemble {
  ObjectId id = 0;
  EnsembleOutput output;
};

/// Ensemble prediction `steps` ticks ahead for every object present over the
/// trailing `history_length` ticks. Members run in index order.
std::vector<ObjectEnsemble> ensemble_predict_all(std::span<const StglModel> models, const WindowBatch& window,
                                                 int steps = 1);
std::vector<ObjectEnsemble> ensemble_predict_all(std::span<const StglModel> models,
                                                 const SpatioTemporalGraph& history, std::size_t history_length,
                                                 int steps = 1);

/// Next-tick ensemble prediction for one object; the object's neighbours in
/// the latest graph take part through the attention layers.
EnsembleOutput ensemble_predict(std::span<const StglModel> models, const SpatioTemporalGraph& history, ObjectId id,
                                std::size_t history_length = 8);

}  // namespace colloc::stgl

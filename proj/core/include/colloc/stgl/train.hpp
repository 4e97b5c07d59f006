#pragma once

#include "colloc/stgl/graph.hpp"
#include "colloc/stgl/model.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <vector>

namespace colloc::stgl {

/// One supervised example: a window of positions (oldest first, 3 x M each),
/// the spatial edges, and ground truth `horizon` ticks after the window.
struct TrainSample {
  std::vector<nn::Matrix> window;
  nn::Adjacency adjacency;
  nn::Matrix target;  // 3 x M
  int horizon = 1;

  std::size_t objects() const { return static_cast<std::size_t>(target.cols()); }
};

/// Builds a sample from the trailing `history_length` graphs; objects without
/// ground truth or missing from the window are dropped. Returns nullopt when
/// nothing remains.
std::optional<TrainSample> make_sample(const SpatioTemporalGraph& history, const std::map<ObjectId, Vec3>& truth,
                                       std::size_t history_length, int horizon = 1);

struct TrainConfig {
  int ensemble_size = 5;
  int epochs = 20;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
  std::size_t history_length = 8;
  std::size_t batch_size = 16;
  int threads = 1;
  ModelDims dims;
  double input_scale = 10.0;

  void validate() const;
};

struct TrainedMember {
  StglModel model;
  std::vector<double> loss_curve;  // mean per-object NLL after each epoch
  double initial_loss = 0.0;
  double final_loss = 0.0;
};

/// Seed used for member `index` of an ensemble trained with `seed`.
std::uint64_t member_seed(std::uint64_t seed, int index);

/// Mean per-object NLL of `samples` under `model` (evaluation mode).
double dataset_nll(const StglModel& model, std::span<const TrainSample> samples);

/// Trains one member with Adam on shuffled minibatches. Samples in a
/// minibatch are stacked column-wise with a block-diagonal adjacency.
TrainedMember train_member(std::span<const TrainSample> dataset, const TrainConfig& config, int index);

/// Trains K members independently from seed-varied initialisations on the
/// same data. Members may train concurrently (config.threads); results are
/// returned in member order and do not depend on the thread count.
std::vector<TrainedMember> train_ensemble(std::span<const TrainSample> dataset, const TrainConfig& config);

}  // namespace colloc::stgl

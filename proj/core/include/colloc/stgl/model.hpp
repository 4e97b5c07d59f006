#pragma once

#include "colloc/nn/layers.hpp"
#include "colloc/nn/matrix.hpp"
#include "colloc/nn/tape.hpp"
#include "colloc/stgl/graph.hpp"

#include <cstdint>
#include <random>
#include <vector>

namespace colloc::stgl {

/// Layer widths. The decoder's hidden state is seeded with the concatenated
/// temporal and spatial embeddings, so decoder_hidden == 2 * embedding.
struct ModelDims {
  int input = 3;
  int encoder_hidden = 32;   // temporal embedding m
  int gat_hidden = 64;       // first attention layer width
  int embedding = 32;        // spatial embedding s
  int decoder_hidden = 64;
  int head = 6;              // 3 mean displacement + 3 raw variances

  void validate() const;
  /// The reference widths: 3x32 encoder, 32x64 attention, 64x6 output head.
  bool is_standard() const { return *this == ModelDims{}; }
  bool operator==(const ModelDims&) const = default;

  /// Reduced widths for tests and finite-difference checks.
  static ModelDims small(int hidden);
};

inline constexpr double kVarianceFloor = 1e-6;
/// Initial bias of the raw-variance outputs: softplus(b) = 0.01 m^2.
inline constexpr double kInitialVarianceBias = -4.600166;

/// Parameters of the spatiotemporal graph learner.
///
/// Names in the ParamSet: encoder.{wx,wh,b}, gat0.{w,a}, gat1.{w,a},
/// decoder.{wx,wh,b}, head.{w,b}.
class StglModel {
 public:
  StglModel() : StglModel(ModelDims{}, 0) {}
  /// Seeded uniform +-1/sqrt(fan_in) initialisation.
  StglModel(ModelDims dims, std::uint64_t seed, double input_scale = 10.0);
  /// All weights zero.
  static StglModel zeros(ModelDims dims, double input_scale = 10.0);
  /// Wraps an existing parameter set; throws if names or shapes disagree with `dims`.
  static StglModel from_params(ModelDims dims, nn::ParamSet params, double input_scale);

  const ModelDims& dims() const { return dims_; }
  /// Multiplier applied to displacements before they enter the LSTMs.
  double input_scale() const { return input_scale_; }
  double dropout() const { return dropout_; }
  nn::ParamSet& params() { return params_; }
  const nn::ParamSet& params() const { return params_; }

  nn::LstmParams encoder() const { return nn::extract_lstm(params_, "encoder"); }
  nn::LstmParams decoder() const { return nn::extract_lstm(params_, "decoder"); }
  nn::GatLayerParams gat(int layer) const;

  bool operator==(const StglModel& other) const;

 private:
  StglModel(ModelDims dims, nn::ParamSet params, double input_scale);
  void check_params() const;

  ModelDims dims_;
  nn::ParamSet params_;
  double input_scale_ = 10.0;
  double dropout_ = nn::kDefaultDropout;
};

/// Forward pass of one model bound to a tape. Columns are objects; several
/// graphs can share a batch through a block-diagonal adjacency.
class StglNetwork {
 public:
  /// Parameters become gradient leaves when the tape records.
  StglNetwork(nn::Tape& tape, StglModel& model, std::mt19937_64* dropout_rng = nullptr);
  StglNetwork(nn::Tape& tape, const StglModel& model);

  /// Runs the encoder over consecutive displacements (each 3 x M); returns m (H x M).
  nn::Var encode(const std::vector<nn::Matrix>& positions);
  /// Two attention layers over the temporal embeddings; returns s.
  nn::Var embed(const nn::Var& temporal, const nn::Adjacency& adjacency);

  struct DecoderState {
    nn::Var cell;
    nn::Var hidden;
  };
  struct Step {
    nn::Var displacement;  // 3 x M
    nn::Var variance;      // 3 x M, softplus + floor
  };
  DecoderState start_decoder(const nn::Var& temporal, const nn::Var& spatial);
  /// One decoder step fed with a (metric, unscaled) displacement.
  Step decode(DecoderState& state, const nn::Var& displacement);

  struct Rollout {
    std::vector<nn::Var> means;      // absolute positions per step
    std::vector<nn::Var> variances;  // accumulated per step
  };
  /// Full pipeline: encode the window, embed, decode `steps` times feeding the
  /// predicted displacement back as the next input.
  Rollout rollout(const std::vector<nn::Matrix>& positions, const nn::Adjacency& adjacency, int steps);

  nn::Tape& tape() { return tape_; }

 private:
  void bind(const nn::ParamSet& params);
  void bind(nn::ParamSet& params);

  nn::Tape& tape_;
  const StglModel& model_;
  std::mt19937_64* dropout_rng_ = nullptr;
  nn::LstmVars encoder_;
  nn::LstmVars decoder_;
  nn::GatVars gat_[2];
  nn::Var head_w_;
  nn::Var head_b_;
};

/// Final hidden state of the encoder run over the object's displacement
/// history. Needs >= 3 consecutive ticks of the object.
nn::Vector encode_temporal(const StglModel& model, const SpatioTemporalGraph& history, ObjectId id);

/// Spatial embeddings for temporal embeddings stored as columns.
nn::Matrix embed_spatial(const StglModel& model, const nn::Matrix& temporal, const nn::Adjacency& adjacency);

/// One decoder step from embeddings m, s and the last observed displacement.
/// The mean is `last_position` plus the predicted displacement.
GaussianEstimate decode_state(const StglModel& model, const nn::Vector& temporal, const nn::Vector& spatial,
                              const Vec3& last_displacement, const Vec3& last_position = Vec3::Zero());

struct ObjectPrediction {
  ObjectId id = 0;
  std::vector<GaussianEstimate> steps;  // step k predicts k+1 ticks ahead
};

/// Predicts every object present over the last `history_length` ticks
/// `steps` ticks ahead. Covariances accumulate across steps.
std::vector<ObjectPrediction> rollout(const StglModel& model, const SpatioTemporalGraph& history, int steps,
                                      std::size_t history_length);
std::vector<ObjectPrediction> rollout(const StglModel& model, const WindowBatch& window, int steps);

}  // namespace colloc::stgl

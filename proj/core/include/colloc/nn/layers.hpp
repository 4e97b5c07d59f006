#pragma once

#include "colloc/nn/matrix.hpp"
#include "colloc/nn/tape.hpp"

#include <array>
#include <random>
#include <string_view>

namespace colloc::nn {

/// One-layer LSTM weights. Gates are stacked as [input, forget, candidate, output]
/// along the rows of every matrix.
struct LstmParams {
  Matrix input_weights;   // 4H x I
  Matrix hidden_weights;  // 4H x H
  Matrix bias;            // 4H x 1

  Eigen::Index input_dim() const { return input_weights.cols(); }
  Eigen::Index hidden_dim() const { return hidden_weights.cols(); }
  void validate() const;

  static LstmParams zeros(Eigen::Index input_dim, Eigen::Index hidden_dim);
  /// Uniform in +-1/sqrt(fan_in) per matrix.
  static LstmParams random(Eigen::Index input_dim, Eigen::Index hidden_dim, std::mt19937_64& rng);
};

struct LstmState {
  Vector cell;
  Vector hidden;
};

/// Single-layer graph attention weights: a shared linear map and an attention
/// vector whose first half scores the receiving node and second half the sender.
struct GatLayerParams {
  Matrix weight;     // out x in
  Matrix attention;  // 2*out x 1

  Eigen::Index input_dim() const { return weight.cols(); }
  Eigen::Index output_dim() const { return weight.rows(); }
  void validate() const;

  static GatLayerParams random(Eigen::Index input_dim, Eigen::Index output_dim, std::mt19937_64& rng);
};

inline constexpr double kAttentionSlope = 0.2;
inline constexpr double kDefaultDropout = 0.1;

struct GatParams {
  std::array<GatLayerParams, 2> layers;
  double dropout = kDefaultDropout;
};

// Tape-level bindings. Each op below is the single implementation used both for
// training (parameters bound as gradient leaves) and for inference.

struct LstmVars {
  Var input_weights;
  Var hidden_weights;
  Var bias;
};

struct GatVars {
  Var weight;
  Var attention;
};

LstmVars bind(Tape& tape, const LstmParams& params);
GatVars bind(Tape& tape, const GatLayerParams& params);
/// Binds `<prefix>.wx`, `<prefix>.wh`, `<prefix>.b` from a ParamSet.
LstmVars bind_lstm(Tape& tape, ParamSet& params, std::string_view prefix);
LstmVars bind_lstm(Tape& tape, const ParamSet& params, std::string_view prefix);
/// Binds `<prefix>.w`, `<prefix>.a`.
GatVars bind_gat(Tape& tape, ParamSet& params, std::string_view prefix);
GatVars bind_gat(Tape& tape, const ParamSet& params, std::string_view prefix);

void add_lstm(ParamSet& params, std::string_view prefix, const LstmParams& lstm);
void add_gat(ParamSet& params, std::string_view prefix, const GatLayerParams& gat);
LstmParams extract_lstm(const ParamSet& params, std::string_view prefix);
GatLayerParams extract_gat(const ParamSet& params, std::string_view prefix);

struct LstmOutput {
  Var cell;
  Var hidden;
};

/// Batched LSTM step; columns are independent sequences.
LstmOutput lstm_step(const LstmVars& params, const Var& cell, const Var& hidden, const Var& input);

struct GatOutput {
  Var features;   // out x M
  Var attention;  // M x M, rows sum to one over each neighbourhood
};

/// One attention layer over node features stored as columns.
/// `dropout_rng` enables training-mode dropout on the layer output; pass
/// nullptr for evaluation.
GatOutput gat_layer(const GatVars& params, const Var& features, const Adjacency& adjacency, double dropout,
                    std::mt19937_64* dropout_rng);

/// Convenience evaluation of one LSTM step on plain vectors.
LstmState lstm_step(const LstmParams& params, const Vector& cell, const Vector& hidden, const Vector& input);

struct GatResult {
  Matrix features;
  Matrix attention;
};

/// Convenience evaluation of one attention layer; node features are columns.
/// An empty graph yields empty outputs; a node with no neighbour (self-loop
/// included) is rejected.
GatResult gat_forward(const GatLayerParams& params, const Matrix& node_features, const Adjacency& adjacency,
                      bool train_mode, double dropout, std::mt19937_64& rng);

void validate_adjacency(const Adjacency& adjacency, Eigen::Index nodes);

Matrix uniform_init(Eigen::Index rows, Eigen::Index cols, double fan_in, std::mt19937_64& rng);

}  // namespace colloc::nn

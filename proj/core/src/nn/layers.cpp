#include "colloc/nn/layers.hpp"

#include "colloc/error.hpp"

#include <fmt/format.h>

#include <cmath>
#include <string>

namespace colloc::nn {

Matrix uniform_init(Eigen::Index rows, Eigen::Index cols, double fan_in, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(std::max(fan_in, 1.0));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix m(rows, cols);
  // Fill row-major so the draw order matches the checkpoint layout.
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = dist(rng);
  }
  return m;
}

void LstmParams::validate() const {
  const Eigen::Index h = hidden_weights.cols();
  if (h <= 0 || input_weights.cols() <= 0) throw ShapeError("lstm: empty dimensions");
  require_shape(hidden_weights, 4 * h, h, "lstm hidden weights");
  require_shape(input_weights, 4 * h, input_weights.cols(), "lstm input weights");
  require_shape(bias, 4 * h, 1, "lstm bias");
}

LstmParams LstmParams::zeros(Eigen::Index input_dim, Eigen::Index hidden_dim) {
  return {Matrix::Zero(4 * hidden_dim, input_dim), Matrix::Zero(4 * hidden_dim, hidden_dim),
          Matrix::Zero(4 * hidden_dim, 1)};
}

LstmParams LstmParams::random(Eigen::Index input_dim, Eigen::Index hidden_dim, std::mt19937_64& rng) {
  LstmParams p;
  p.input_weights = uniform_init(4 * hidden_dim, input_dim, static_cast<double>(input_dim), rng);
  p.hidden_weights = uniform_init(4 * hidden_dim, hidden_dim, static_cast<double>(hidden_dim), rng);
  p.bias = uniform_init(4 * hidden_dim, 1, static_cast<double>(hidden_dim), rng);
  return p;
}

void GatLayerParams::validate() const {
  if (weight.rows() <= 0 || weight.cols() <= 0) throw ShapeError("gat: empty weight");
  require_shape(attention, 2 * weight.rows(), 1, "gat attention vector");
}

GatLayerParams GatLayerParams::random(Eigen::Index input_dim, Eigen::Index output_dim, std::mt19937_64& rng) {
  GatLayerParams p;
  p.weight = uniform_init(output_dim, input_dim, static_cast<double>(input_dim), rng);
  p.attention = uniform_init(2 * output_dim, 1, static_cast<double>(output_dim), rng);
  return p;
}

LstmVars bind(Tape& tape, const LstmParams& params) {
  params.validate();
  return {tape.constant_ref(params.input_weights), tape.constant_ref(params.hidden_weights),
          tape.constant_ref(params.bias)};
}

GatVars bind(Tape& tape, const GatLayerParams& params) {
  params.validate();
  return {tape.constant_ref(params.weight), tape.constant_ref(params.attention)};
}

namespace {

std::string join(std::string_view prefix, std::string_view leaf) { return fmt::format("{}.{}", prefix, leaf); }

template <typename Params>
LstmVars bind_lstm_impl(Tape& tape, Params& params, std::string_view prefix) {
  return {tape.parameter(params, join(prefix, "wx")), tape.parameter(params, join(prefix, "wh")),
          tape.parameter(params, join(prefix, "b"))};
}

template <typename Params>
GatVars bind_gat_impl(Tape& tape, Params& params, std::string_view prefix) {
  return {tape.parameter(params, join(prefix, "w")), tape.parameter(params, join(prefix, "a"))};
}

}  // namespace

LstmVars bind_lstm(Tape& tape, ParamSet& params, std::string_view prefix) {
  return bind_lstm_impl(tape, params, prefix);
}
LstmVars bind_lstm(Tape& tape, const ParamSet& params, std::string_view prefix) {
  return bind_lstm_impl(tape, params, prefix);
}
GatVars bind_gat(Tape& tape, ParamSet& params, std::string_view prefix) { return bind_gat_impl(tape, params, prefix); }
GatVars bind_gat(Tape& tape, const ParamSet& params, std::string_view prefix) {
  return bind_gat_impl(tape, params, prefix);
}

void add_lstm(ParamSet& params, std::string_view prefix, const LstmParams& lstm) {
  lstm.validate();
  params.add(join(prefix, "wx"), lstm.input_weights);
  params.add(join(prefix, "wh"), lstm.hidden_weights);
  params.add(join(prefix, "b"), lstm.bias);
}

void add_gat(ParamSet& params, std::string_view prefix, const GatLayerParams& gat) {
  gat.validate();
  params.add(join(prefix, "w"), gat.weight);
  params.add(join(prefix, "a"), gat.attention);
}

LstmParams extract_lstm(const ParamSet& params, std::string_view prefix) {
  return {params.value(join(prefix, "wx")), params.value(join(prefix, "wh")), params.value(join(prefix, "b"))};
}

GatLayerParams extract_gat(const ParamSet& params, std::string_view prefix) {
  return {params.value(join(prefix, "w")), params.value(join(prefix, "a"))};
}

LstmOutput lstm_step(const LstmVars& params, const Var& cell, const Var& hidden, const Var& input) {
  const Eigen::Index h = params.hidden_weights.cols();
  const Eigen::Index in = params.input_weights.cols();
  if (input.rows() != in) throw ShapeError(fmt::format("lstm_step: input has {} rows, expected {}", input.rows(), in));
  if (hidden.rows() != h || cell.rows() != h) {
    throw ShapeError(fmt::format("lstm_step: state has {}/{} rows, expected {}", cell.rows(), hidden.rows(), h));
  }
  if (hidden.cols() != input.cols() || cell.cols() != input.cols()) {
    throw ShapeError("lstm_step: batch size mismatch between state and input");
  }
  Var gates = add_bias(add(matmul(params.input_weights, input), matmul(params.hidden_weights, hidden)), params.bias);
  Var input_gate = sigmoid(slice_rows(gates, 0, h));
  Var forget_gate = sigmoid(slice_rows(gates, h, h));
  Var candidate = tanh(slice_rows(gates, 2 * h, h));
  Var output_gate = sigmoid(slice_rows(gates, 3 * h, h));
  Var next_cell = add(hadamard(forget_gate, cell), hadamard(input_gate, candidate));
  Var next_hidden = hadamard(output_gate, tanh(next_cell));
  return {next_cell, next_hidden};
}

void validate_adjacency(const Adjacency& adjacency, Eigen::Index nodes) {
  if (adjacency.rows() != nodes || adjacency.cols() != nodes) {
    throw ShapeError(fmt::format("adjacency is {}x{} for {} nodes", adjacency.rows(), adjacency.cols(), nodes));
  }
  for (Eigen::Index i = 0; i < nodes; ++i) {
    if (!adjacency.row(i).any()) throw ShapeError(fmt::format("node {} has no neighbours (self-loop missing)", i));
  }
}

GatOutput gat_layer(const GatVars& params, const Var& features, const Adjacency& adjacency, double dropout,
                    std::mt19937_64* dropout_rng) {
  const Eigen::Index out = params.weight.rows();
  validate_adjacency(adjacency, features.cols());
  if (params.attention.rows() != 2 * out || params.attention.cols() != 1) {
    throw ShapeError("gat_layer: attention vector must be 2*out x 1");
  }
  Var transformed = matmul(params.weight, features);
  Var receiver_score = matmul(transpose(slice_rows(params.attention, 0, out)), transformed);
  Var sender_score = matmul(transpose(slice_rows(params.attention, out, out)), transformed);
  Var logits = leaky_relu(pairwise_sum(receiver_score, sender_score), kAttentionSlope);
  Var attention = masked_softmax_rows(logits, adjacency);
  Var result = relu(matmul_bt(transformed, attention));
  if (dropout_rng && dropout > 0.0) {
    std::bernoulli_distribution keep(1.0 - dropout);
    Matrix m(result.rows(), result.cols());
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = keep(*dropout_rng) ? 1.0 / (1.0 - dropout) : 0.0;
    }
    result = mask(result, m);
  }
  return {result, attention};
}

LstmState lstm_step(const LstmParams& params, const Vector& cell, const Vector& hidden, const Vector& input) {
  params.validate();
  Tape tape(false);
  LstmVars vars = bind(tape, params);
  Matrix c = cell;
  Matrix h = hidden;
  Matrix x = input;
  LstmOutput out = lstm_step(vars, tape.constant_ref(c), tape.constant_ref(h), tape.constant_ref(x));
  return {out.cell.value().col(0), out.hidden.value().col(0)};
}

GatResult gat_forward(const GatLayerParams& params, const Matrix& node_features, const Adjacency& adjacency,
                      bool train_mode, double dropout, std::mt19937_64& rng) {
  params.validate();
  if (node_features.rows() != params.input_dim()) {
    throw ShapeError(fmt::format("gat_forward: features have {} rows, expected {}", node_features.rows(),
                                 params.input_dim()));
  }
  if (node_features.cols() == 0) {
    if (adjacency.size() != 0) throw ShapeError("gat_forward: adjacency given for an empty graph");
    return {Matrix(params.output_dim(), 0), Matrix(0, 0)};
  }
  Tape tape(false);
  GatVars vars = bind(tape, params);
  GatOutput out = gat_layer(vars, tape.constant_ref(node_features), adjacency, dropout, train_mode ? &rng : nullptr);
  return {out.features.value(), out.attention.value()};
}

}  // namespace colloc::nn

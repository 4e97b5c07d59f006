#include "colloc/stgl/model.hpp"

#include "colloc/error.hpp"

#include <fmt/format.h>

namespace colloc::stgl {

void ModelDims::validate() const {
  if (input != 3) throw ShapeError(fmt::format("model: input width must be 3, got {}", input));
  if (head != 6) throw ShapeError(fmt::format("model: output head must be 6 wide, got {}", head));
  if (encoder_hidden <= 0 || gat_hidden <= 0 || embedding <= 0) throw ShapeError("model: non-positive layer width");
  if (decoder_hidden != encoder_hidden + embedding) {
    throw ShapeError(fmt::format("model: decoder width {} must equal temporal + spatial embedding width {}",
                                 decoder_hidden, encoder_hidden + embedding));
  }
}

ModelDims ModelDims::small(int hidden) {
  ModelDims d;
  d.encoder_hidden = hidden;
  d.gat_hidden = hidden;
  d.embedding = hidden;
  d.decoder_hidden = 2 * hidden;
  return d;
}

StglModel::StglModel(ModelDims dims, nn::ParamSet params, double input_scale)
    : dims_(dims), params_(std::move(params)), input_scale_(input_scale) {
  dims_.validate();
  check_params();
}

StglModel::StglModel(ModelDims dims, std::uint64_t seed, double input_scale) : dims_(dims), input_scale_(input_scale) {
  dims_.validate();
  std::mt19937_64 rng(seed);
  nn::add_lstm(params_, "encoder", nn::LstmParams::random(dims.input, dims.encoder_hidden, rng));
  nn::add_gat(params_, "gat0", nn::GatLayerParams::random(dims.encoder_hidden, dims.gat_hidden, rng));
  nn::add_gat(params_, "gat1", nn::GatLayerParams::random(dims.gat_hidden, dims.embedding, rng));
  nn::add_lstm(params_, "decoder", nn::LstmParams::random(dims.input, dims.decoder_hidden, rng));
  params_.add("head.w", nn::uniform_init(dims.head, dims.decoder_hidden, dims.decoder_hidden, rng));
  nn::Matrix head_b = nn::uniform_init(dims.head, 1, dims.decoder_hidden, rng);
  head_b.bottomRows(3).setConstant(kInitialVarianceBias);
  params_.add("head.b", std::move(head_b));
}

StglModel StglModel::zeros(ModelDims dims, double input_scale) {
  dims.validate();
  nn::ParamSet p;
  nn::add_lstm(p, "encoder", nn::LstmParams::zeros(dims.input, dims.encoder_hidden));
  nn::add_gat(p, "gat0",
              {nn::Matrix::Zero(dims.gat_hidden, dims.encoder_hidden), nn::Matrix::Zero(2 * dims.gat_hidden, 1)});
  nn::add_gat(p, "gat1", {nn::Matrix::Zero(dims.embedding, dims.gat_hidden), nn::Matrix::Zero(2 * dims.embedding, 1)});
  nn::add_lstm(p, "decoder", nn::LstmParams::zeros(dims.input, dims.decoder_hidden));
  p.add("head.w", nn::Matrix::Zero(dims.head, dims.decoder_hidden));
  p.add("head.b", nn::Matrix::Zero(dims.head, 1));
  return StglModel(dims, std::move(p), input_scale);
}

StglModel StglModel::from_params(ModelDims dims, nn::ParamSet params, double input_scale) {
  return StglModel(dims, std::move(params), input_scale);
}

void StglModel::check_params() const {
  const auto expect = [&](std::string_view name, Eigen::Index rows, Eigen::Index cols) {
    if (!params_.contains(name)) throw ShapeError(fmt::format("model: missing parameter '{}'", name));
    nn::require_shape(params_.value(name), rows, cols, name);
  };
  const ModelDims& d = dims_;
  expect("encoder.wx", 4 * d.encoder_hidden, d.input);
  expect("encoder.wh", 4 * d.encoder_hidden, d.encoder_hidden);
  expect("encoder.b", 4 * d.encoder_hidden, 1);
  expect("gat0.w", d.gat_hidden, d.encoder_hidden);
  expect("gat0.a", 2 * d.gat_hidden, 1);
  expect("gat1.w", d.embedding, d.gat_hidden);
  expect("gat1.a", 2 * d.embedding, 1);
  expect("decoder.wx", 4 * d.decoder_hidden, d.input);
  expect("decoder.wh", 4 * d.decoder_hidden, d.decoder_hidden);
  expect("decoder.b", 4 * d.decoder_hidden, 1);
  expect("head.w", d.head, d.decoder_hidden);
  expect("head.b", d.head, 1);
  if (params_.size() != 12) throw ShapeError("model: unexpected extra parameters");
}

nn::GatLayerParams StglModel::gat(int layer) const {
  if (layer != 0 && layer != 1) throw Error(fmt::format("model: no attention layer {}", layer));
  return nn::extract_gat(params_, layer == 0 ? "gat0" : "gat1");
}

bool StglModel::operator==(const StglModel& other) const {
  return dims_ == other.dims_ && input_scale_ == other.input_scale_ && params_ == other.params_;
}

StglNetwork::StglNetwork(nn::Tape& tape, StglModel& model, std::mt19937_64* dropout_rng)
    : tape_(tape), model_(model), dropout_rng_(dropout_rng) {
  bind(model.params());
}

StglNetwork::StglNetwork(nn::Tape& tape, const StglModel& model) : tape_(tape), model_(model) {
  bind(model.params());
}

void StglNetwork::bind(const nn::ParamSet& params) {
  encoder_ = nn::bind_lstm(tape_, params, "encoder");
  decoder_ = nn::bind_lstm(tape_, params, "decoder");
  gat_[0] = nn::bind_gat(tape_, params, "gat0");
  gat_[1] = nn::bind_gat(tape_, params, "gat1");
  head_w_ = tape_.parameter(params, "head.w");
  head_b_ = tape_.parameter(params, "head.b");
}

void StglNetwork::bind(nn::ParamSet& params) {
  encoder_ = nn::bind_lstm(tape_, params, "encoder");
  decoder_ = nn::bind_lstm(tape_, params, "decoder");
  gat_[0] = nn::bind_gat(tape_, params, "gat0");
  gat_[1] = nn::bind_gat(tape_, params, "gat1");
  head_w_ = tape_.parameter(params, "head.w");
  head_b_ = tape_.parameter(params, "head.b");
}

nn::Var StglNetwork::encode(const std::vector<nn::Matrix>& positions) {
  if (positions.size() < 3) {
    throw Error(fmt::format("encode: need at least 3 ticks of history, got {}", positions.size()));
  }
  const Eigen::Index m = positions.front().cols();
  const Eigen::Index h = model_.dims().encoder_hidden;
  for (const auto& p : positions) nn::require_shape(p, 3, m, "encode: window positions");
  nn::Var cell = tape_.constant(nn::Matrix::Zero(h, m));
  nn::Var hidden = tape_.constant(nn::Matrix::Zero(h, m));
  for (std::size_t k = 1; k < positions.size(); ++k) {
    nn::Var input = tape_.constant((positions[k] - positions[k - 1]) * model_.input_scale());
    auto out = nn::lstm_step(encoder_, cell, hidden, input);
    cell = out.cell;
    hidden = out.hidden;
  }
  return hidden;
}

nn::Var StglNetwork::embed(const nn::Var& temporal, const nn::Adjacency& adjacency) {
  if (temporal.cols() != adjacency.rows()) {
    throw ShapeError(fmt::format("embed: {} embeddings for a {}-node adjacency", temporal.cols(), adjacency.rows()));
  }
  auto first = nn::gat_layer(gat_[0], temporal, adjacency, model_.dropout(), dropout_rng_);
  auto second = nn::gat_layer(gat_[1], first.features, adjacency, model_.dropout(), dropout_rng_);
  return second.features;
}

StglNetwork::DecoderState StglNetwork::start_decoder(const nn::Var& temporal, const nn::Var& spatial) {
  nn::Var hidden = nn::concat_rows(temporal, spatial);
  if (hidden.rows() != model_.dims().decoder_hidden) {
    throw ShapeError(fmt::format("decoder: context has {} rows, expected {}", hidden.rows(),
                                 model_.dims().decoder_hidden));
  }
  return {tape_.constant(nn::Matrix::Zero(hidden.rows(), hidden.cols())), hidden};
}

StglNetwork::Step StglNetwork::decode(DecoderState& state, const nn::Var& displacement) {
  auto out = nn::lstm_step(decoder_, state.cell, state.hidden, nn::scale(displacement, model_.input_scale()));
  state.cell = out.cell;
  state.hidden = out.hidden;
  nn::Var head = nn::add_bias(nn::matmul(head_w_, out.hidden), head_b_);
  return {nn::slice_rows(head, 0, 3), nn::softplus(nn::slice_rows(head, 3, 3), kVarianceFloor)};
}

StglNetwork::Rollout StglNetwork::rollout(const std::vector<nn::Matrix>& positions, const nn::Adjacency& adjacency,
                                          int steps) {
  if (steps < 1) throw Error("rollout: steps must be >= 1");
  nn::Var temporal = encode(positions);
  nn::Var spatial = embed(temporal, adjacency);
  DecoderState state = start_decoder(temporal, spatial);
  const std::size_t t = positions.size();
  nn::Var input = tape_.constant(positions[t - 1] - positions[t - 2]);
  nn::Var mean = tape_.constant(positions[t - 1]);
  Rollout out;
  for (int k = 0; k < steps; ++k) {
    Step step = decode(state, input);
    mean = nn::add(mean, step.displacement);
    out.means.push_back(mean);
    out.variances.push_back(out.variances.empty() ? step.variance : nn::add(out.variances.back(), step.variance));
    input = step.displacement;
  }
  return out;
}

nn::Vector encode_temporal(const StglModel& model, const SpatioTemporalGraph& history, ObjectId id) {
  WindowBatch window = extract_object_window(history, id);
  if (window.length() < 3) {
    throw Error(fmt::format("encode_temporal: object {} present for {} consecutive ticks, need >= 3", id,
                            window.length()));
  }
  nn::Tape tape(false);
  StglNetwork net(tape, model);
  return net.encode(window.positions).value().col(0);
}

nn::Matrix embed_spatial(const StglModel& model, const nn::Matrix& temporal, const nn::Adjacency& adjacency) {
  if (temporal.rows() != model.dims().encoder_hidden) {
    throw ShapeError(fmt::format("embed_spatial: embeddings have {} rows, expected {}", temporal.rows(),
                                 model.dims().encoder_hidden));
  }
  if (temporal.cols() == 0 && adjacency.size() == 0) return nn::Matrix(model.dims().embedding, 0);
  nn::Tape tape(false);
  StglNetwork net(tape, model);
  return net.embed(tape.constant_ref(temporal), adjacency).value();
}

GaussianEstimate decode_state(const StglModel& model, const nn::Vector& temporal, const nn::Vector& spatial,
                              const Vec3& last_displacement, const Vec3& last_position) {
  nn::require_shape(temporal, model.dims().encoder_hidden, 1, "decode_state: temporal embedding");
  nn::require_shape(spatial, model.dims().embedding, 1, "decode_state: spatial embedding");
  nn::Tape tape(false);
  StglNetwork net(tape, model);
  auto state = net.start_decoder(tape.constant(temporal), tape.constant(spatial));
  auto step = net.decode(state, tape.constant(nn::Matrix(last_displacement)));
  GaussianEstimate est;
  est.mean = last_position + Vec3(step.displacement.value().col(0));
  est.covariance = Vec3(step.variance.value().col(0)).asDiagonal();
  return est;
}

std::vector<ObjectPrediction> rollout(const StglModel& model, const WindowBatch& window, int steps) {
  if (steps < 1) throw Error("rollout: steps must be >= 1");
  std::vector<ObjectPrediction> out;
  if (window.objects() == 0) return out;
  nn::Tape tape(false);
  StglNetwork net(tape, model);
  auto result = net.rollout(window.positions, window.adjacency, steps);
  out.resize(window.objects());
  for (std::size_t i = 0; i < window.objects(); ++i) {
    out[i].id = window.ids[i];
    out[i].steps.resize(static_cast<std::size_t>(steps));
    for (int k = 0; k < steps; ++k) {
      const auto c = static_cast<Eigen::Index>(i);
      auto& est = out[i].steps[static_cast<std::size_t>(k)];
      est.mean = result.means[static_cast<std::size_t>(k)].value().col(c);
      est.covariance = Vec3(result.variances[static_cast<std::size_t>(k)].value().col(c)).asDiagonal();
    }
  }
  return out;
}

std::vector<ObjectPrediction> rollout(const StglModel& model, const SpatioTemporalGraph& history, int steps,
                                      std::size_t history_length) {
  if (steps < 1) throw Error("rollout: steps must be >= 1");
  if (history_length < 3) throw Error("rollout: history length must be >= 3");
  return rollout(model, extract_window(history, history_length), steps);
}

}  // namespace colloc::stgl

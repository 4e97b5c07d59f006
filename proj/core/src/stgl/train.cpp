#include "colloc/stgl/train.hpp"

#include "colloc/error.hpp"
#include "colloc/nn/adam.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <numeric>
#include <thread>

namespace colloc::stgl {

namespace {

struct StackedBatch {
  std::vector<nn::Matrix> window;
  nn::Adjacency adjacency;
  nn::Matrix target;
  std::vector<int> horizon;  // per column
  int max_horizon = 1;
};

StackedBatch stack(std::span<const TrainSample* const> samples) {
  StackedBatch b;
  const std::size_t length = samples.front()->window.size();
  Eigen::Index cols = 0;
  for (const TrainSample* s : samples) {
    if (s->window.size() != length) throw ShapeError("training batch: samples differ in window length");
    cols += s->target.cols();
  }
  b.window.assign(length, nn::Matrix(3, cols));
  b.adjacency = nn::Adjacency::Constant(cols, cols, false);
  b.target.resize(3, cols);
  b.horizon.reserve(static_cast<std::size_t>(cols));
  Eigen::Index offset = 0;
  for (const TrainSample* s : samples) {
    const Eigen::Index m = s->target.cols();
    for (std::size_t t = 0; t < length; ++t) b.window[t].middleCols(offset, m) = s->window[t];
    b.adjacency.block(offset, offset, m, m) = s->adjacency;
    b.target.middleCols(offset, m) = s->target;
    for (Eigen::Index c = 0; c < m; ++c) b.horizon.push_back(s->horizon);
    b.max_horizon = std::max(b.max_horizon, s->horizon);
    offset += m;
  }
  return b;
}

/// Sum of per-object NLL at each column's own horizon.
nn::Var batch_nll(StglNetwork& net, const StackedBatch& b) {
  auto roll = net.rollout(b.window, b.adjacency, b.max_horizon);
  const bool uniform = std::all_of(b.horizon.begin(), b.horizon.end(), [&](int h) { return h == b.max_horizon; });
  if (uniform) return nn::diag_gaussian_nll(roll.means.back(), roll.variances.back(), b.target);

  nn::Var mean, var;
  for (int k = 1; k <= b.max_horizon; ++k) {
    nn::Matrix select = nn::Matrix::Zero(3, b.target.cols());
    bool any = false;
    for (std::size_t c = 0; c < b.horizon.size(); ++c) {
      if (b.horizon[c] == k) {
        select.col(static_cast<Eigen::Index>(c)).setOnes();
        any = true;
      }
    }
    if (!any) continue;
    nn::Var m = nn::mask(roll.means[static_cast<std::size_t>(k - 1)], select);
    nn::Var v = nn::mask(roll.variances[static_cast<std::size_t>(k - 1)], select);
    mean = mean.valid() ? nn::add(mean, m) : m;
    var = var.valid() ? nn::add(var, v) : v;
  }
  return nn::diag_gaussian_nll(mean, var, b.target);
}

void validate_dataset(std::span<const TrainSample> dataset) {
  if (dataset.empty()) throw Error("training: empty dataset");
  const std::size_t length = dataset.front().window.size();
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const TrainSample& s = dataset[i];
    if (s.window.size() != length || length < 3) {
      throw ShapeError(fmt::format("training: sample {} has window length {}", i, s.window.size()));
    }
    if (s.horizon < 1) throw Error(fmt::format("training: sample {} has horizon {}", i, s.horizon));
    const Eigen::Index m = s.target.cols();
    if (m == 0) throw Error(fmt::format("training: sample {} has no objects", i));
    nn::require_shape(s.target, 3, m, "training target");
    for (const auto& p : s.window) nn::require_shape(p, 3, m, "training window");
    nn::validate_adjacency(s.adjacency, m);
  }
}

}  // namespace

std::optional<TrainSample> make_sample(const SpatioTemporalGraph& history, const std::map<ObjectId, Vec3>& truth,
                                       std::size_t history_length, int horizon) {
  if (horizon < 1) throw Error("make_sample: horizon must be >= 1");
  WindowBatch window = extract_window(history, history_length);
  std::vector<Eigen::Index> keep;
  for (std::size_t i = 0; i < window.objects(); ++i) {
    if (truth.contains(window.ids[i])) keep.push_back(static_cast<Eigen::Index>(i));
  }
  if (keep.empty()) return std::nullopt;
  const auto m = static_cast<Eigen::Index>(keep.size());
  TrainSample s;
  s.horizon = horizon;
  s.window.assign(window.length(), nn::Matrix(3, m));
  s.target.resize(3, m);
  s.adjacency.resize(m, m);
  for (Eigen::Index c = 0; c < m; ++c) {
    for (std::size_t t = 0; t < window.length(); ++t) s.window[t].col(c) = window.positions[t].col(keep[c]);
    s.target.col(c) = truth.at(window.ids[static_cast<std::size_t>(keep[c])]);
    for (Eigen::Index r = 0; r < m; ++r) s.adjacency(c, r) = window.adjacency(keep[c], keep[r]);
  }
  return s;
}

void TrainConfig::validate() const {
  if (ensemble_size < 1) throw Error("train: ensemble size must be >= 1");
  if (epochs < 0) throw Error("train: epochs must be >= 0");
  if (!(learning_rate > 0.0)) throw Error("train: learning rate must be positive");
  if (history_length < 3) throw Error("train: history length must be >= 3");
  if (batch_size < 1) throw Error("train: batch size must be >= 1");
  dims.validate();
}

std::uint64_t member_seed(std::uint64_t seed, int index) {
  // splitmix64 step keeps neighbouring seeds well separated.
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double dataset_nll(const StglModel& model, std::span<const TrainSample> samples) {
  if (samples.empty()) throw Error("dataset_nll: empty dataset");
  double total = 0.0;
  Eigen::Index objects = 0;
  constexpr std::size_t kChunk = 32;
  std::vector<const TrainSample*> ptrs;
  for (std::size_t start = 0; start < samples.size(); start += kChunk) {
    ptrs.clear();
    for (std::size_t i = start; i < std::min(samples.size(), start + kChunk); ++i) ptrs.push_back(&samples[i]);
    StackedBatch b = stack(ptrs);
    nn::Tape tape(false);
    StglNetwork net(tape, model);
    total += batch_nll(net, b).value()(0, 0);
    objects += b.target.cols();
  }
  return total / static_cast<double>(objects);
}

TrainedMember train_member(std::span<const TrainSample> dataset, const TrainConfig& config, int index) {
  config.validate();
  validate_dataset(dataset);
  const std::uint64_t seed = member_seed(config.seed, index);
  TrainedMember member{StglModel(config.dims, seed, config.input_scale), {}, 0.0, 0.0};
  member.initial_loss = dataset_nll(member.model, dataset);

  std::mt19937_64 shuffle_rng(seed ^ 0x5DEECE66DULL);
  std::mt19937_64 dropout_rng(seed ^ 0xB5297A4DULL);
  nn::AdamState adam(nn::AdamConfig{.learning_rate = config.learning_rate});
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<const TrainSample*> batch;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double epoch_loss = 0.0;
    Eigen::Index epoch_objects = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      batch.clear();
      for (std::size_t i = start; i < std::min(order.size(), start + config.batch_size); ++i) {
        batch.push_back(&dataset[order[i]]);
      }
      StackedBatch b = stack(batch);
      nn::Tape tape(true);
      StglNetwork net(tape, member.model, &dropout_rng);
      nn::Var total = batch_nll(net, b);
      const double value = total.value()(0, 0);
      if (!std::isfinite(value)) {
        throw NumericError(fmt::format("training member {}: non-finite loss at epoch {}, samples {}..{}", index,
                                       epoch, start, start + batch.size() - 1));
      }
      nn::Var loss = nn::scale(total, 1.0 / static_cast<double>(b.target.cols()));
      tape.backward(loss);
      adam.step(member.model.params());
      epoch_loss += value;
      epoch_objects += b.target.cols();
    }
    member.loss_curve.push_back(epoch_loss / static_cast<double>(epoch_objects));
  }
  member.final_loss = dataset_nll(member.model, dataset);
  if (!std::isfinite(member.final_loss)) {
    throw NumericError(fmt::format("training member {}: non-finite final loss", index));
  }
  return member;
}

std::vector<TrainedMember> train_ensemble(std::span<const TrainSample> dataset, const TrainConfig& config) {
  config.validate();
  validate_dataset(dataset);
  const auto k = static_cast<std::size_t>(config.ensemble_size);
  std::vector<std::optional<TrainedMember>> slots(k);
  std::vector<std::exception_ptr> errors(k);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < k; i = next++) {
      try {
        slots[i] = train_member(dataset, config, static_cast<int>(i));
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(config.threads, 1)), 1, k);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  std::vector<TrainedMember> out;
  out.reserve(k);
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

}  // namespace colloc::stgl

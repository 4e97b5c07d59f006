#pragma once

#include "colloc/nn/matrix.hpp"

#include <cstdint>
#include <map>
#include <string>

namespace colloc::nn {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam moments for one ParamSet. Moments are created lazily with the shape of
/// the parameter they track.
class AdamState {
 public:
  explicit AdamState(AdamConfig config = {}) : config_(config) {}

  const AdamConfig& config() const { return config_; }
  std::int64_t steps() const { return steps_; }

  /// Applies one bias-corrected Adam update using the gradients stored in
  /// `params`, then clears them. A non-finite gradient aborts the step before
  /// any parameter is touched; the error names the offending parameter.
  void step(ParamSet& params);

 private:
  AdamConfig config_;
  std::int64_t steps_ = 0;
  std::map<std::string, Matrix, std::less<>> first_;
  std::map<std::string, Matrix, std::less<>> second_;
};

inline void adam_step(AdamState& state, ParamSet& params) { state.step(params); }

}  // namespace colloc::nn

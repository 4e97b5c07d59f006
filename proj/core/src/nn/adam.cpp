#include "colloc/nn/adam.hpp"

#include "colloc/error.hpp"

#include <fmt/format.h>

#include <cmath>

namespace colloc::nn {

void AdamState::step(ParamSet& params) {
  const auto names = params.names();
  for (const auto& name : names) {
    if (!params.grad(name).allFinite()) throw NumericError(fmt::format("adam: non-finite gradient in '{}'", name));
  }
  ++steps_;
  const double t = static_cast<double>(steps_);
  const double correction1 = 1.0 - std::pow(config_.beta1, t);
  const double correction2 = 1.0 - std::pow(config_.beta2, t);
  for (const auto& name : names) {
    Matrix& value = params.value(name);
    Matrix& grad = params.grad(name);
    auto [m_it, m_new] = first_.try_emplace(name, Matrix::Zero(value.rows(), value.cols()));
    auto [v_it, v_new] = second_.try_emplace(name, Matrix::Zero(value.rows(), value.cols()));
    Matrix& m = m_it->second;
    Matrix& v = v_it->second;
    require_shape(m, value.rows(), value.cols(), "adam moment");
    m = config_.beta1 * m + (1.0 - config_.beta1) * grad;
    v = config_.beta2 * v + (1.0 - config_.beta2) * grad.cwiseAbs2();
    value.array() -= config_.learning_rate * (m.array() / correction1) /
                     ((v.array() / correction2).sqrt() + config_.epsilon);
    grad.setZero();
  }
}

}  // namespace colloc::nn

#include "colloc/error.hpp"
#include "colloc/nn/adam.hpp"
#include "colloc/nn/layers.hpp"
#include "colloc/nn/loss.hpp"
#include "colloc/nn/matrix.hpp"
#include "colloc/nn/tape.hpp"
#include "colloc/stgl/model.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <numbers>
#include <random>
#include <sstream>

using namespace colloc;
using namespace colloc::nn;

namespace {

double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Matrix random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = u(rng);
  }
  return m;
}

Adjacency full(Eigen::Index n) { return Adjacency::Constant(n, n, true); }

}  // namespace

TEST(LstmStep, ZeroParamsGiveZeroState) {
  const auto p = LstmParams::zeros(3, 4);
  const auto s = lstm_step(p, Vector::Zero(4), Vector::Zero(4), Vector::Constant(3, 2.5));
  EXPECT_TRUE(s.cell.isZero(0.0));
  EXPECT_TRUE(s.hidden.isZero(0.0));
}

TEST(LstmStep, SaturatedGatesPreserveCell) {
  auto p = LstmParams::zeros(3, 2);
  p.bias.block(0, 0, 2, 1).setConstant(-10.0);  // input gate
  p.bias.block(2, 0, 2, 1).setConstant(10.0);   // forget gate
  Vector cell(2);
  cell << 0.7, -0.3;
  const auto s = lstm_step(p, cell, Vector::Zero(2), Vector::Constant(3, 1.0));
  EXPECT_NEAR(s.cell(0), 0.7, 1e-4);
  EXPECT_NEAR(s.cell(1), -0.3, 1e-4);
}

TEST(LstmStep, MatchesScalarOracle) {
  std::mt19937_64 rng(11);
  const auto p = LstmParams::random(3, 2, rng);
  const Vector x = random_matrix(3, 1, rng);
  const Vector c0 = random_matrix(2, 1, rng);
  const Vector h0 = random_matrix(2, 1, rng);
  const auto s = lstm_step(p, c0, h0, x);
  for (int k = 0; k < 2; ++k) {
    auto pre = [&](int gate) {
      const int row = gate * 2 + k;
      double v = p.bias(row, 0);
      for (int j = 0; j < 3; ++j) v += p.input_weights(row, j) * x(j);
      for (int j = 0; j < 2; ++j) v += p.hidden_weights(row, j) * h0(j);
      return v;
    };
    const double i = sig(pre(0)), f = sig(pre(1)), g = std::tanh(pre(2)), o = sig(pre(3));
    const double c = f * c0(k) + i * g;
    EXPECT_NEAR(s.cell(k), c, 1e-14);
    EXPECT_NEAR(s.hidden(k), o * std::tanh(c), 1e-14);
  }
}

TEST(LstmStep, RejectsShapeMismatch) {
  const auto p = LstmParams::zeros(3, 2);
  EXPECT_THROW(lstm_step(p, Vector::Zero(2), Vector::Zero(2), Vector::Zero(4)), ShapeError);
  EXPECT_THROW(lstm_step(p, Vector::Zero(3), Vector::Zero(2), Vector::Zero(3)), ShapeError);
}

TEST(LstmStep, Deterministic) {
  std::mt19937_64 rng(5);
  const auto p = LstmParams::random(3, 8, rng);
  const Vector x = random_matrix(3, 1, rng);
  const auto a = lstm_step(p, Vector::Zero(8), Vector::Zero(8), x);
  const auto b = lstm_step(p, Vector::Zero(8), Vector::Zero(8), x);
  EXPECT_EQ(a.cell, b.cell);
  EXPECT_EQ(a.hidden, b.hidden);
}

TEST(GatForward, SingleNodeAttendsToItself) {
  std::mt19937_64 rng(3);
  const auto p = GatLayerParams::random(4, 5, rng);
  const Matrix m = random_matrix(4, 1, rng);
  const auto r = gat_forward(p, m, full(1), false, 0.1, rng);
  EXPECT_DOUBLE_EQ(r.attention(0, 0), 1.0);
  const Matrix expected = (p.weight * m).cwiseMax(0.0);
  EXPECT_TRUE(r.features.isApprox(expected, 1e-14));
}

TEST(GatForward, IdenticalNodesShareAttention) {
  std::mt19937_64 rng(4);
  const auto p = GatLayerParams::random(4, 5, rng);
  const Matrix col = random_matrix(4, 1, rng);
  Matrix m(4, 2);
  m << col, col;
  const auto r = gat_forward(p, m, full(2), false, 0.1, rng);
  for (int i = 0; i < 2; ++i) {
    EXPECT_NEAR(r.attention(i, 0), 0.5, 1e-15);
    EXPECT_NEAR(r.attention(i, 1), 0.5, 1e-15);
  }
}

TEST(GatForward, MatchesBruteForceAttention) {
  std::mt19937_64 rng(9);
  const auto p = GatLayerParams::random(4, 3, rng);
  const Matrix m = random_matrix(4, 3, rng);
  Adjacency adj = full(3);
  adj(0, 2) = adj(2, 0) = false;
  const auto r = gat_forward(p, m, adj, false, 0.1, rng);
  const Matrix wh = p.weight * m;
  const Eigen::Index out = 3;
  for (int i = 0; i < 3; ++i) {
    std::vector<double> e(3, 0.0);
    double z = 0.0;
    for (int j = 0; j < 3; ++j) {
      if (!adj(i, j)) continue;
      double s = 0.0;
      for (Eigen::Index k = 0; k < out; ++k) s += p.attention(k, 0) * wh(k, i) + p.attention(out + k, 0) * wh(k, j);
      s = s > 0 ? s : 0.2 * s;
      e[j] = std::exp(s);
      z += e[j];
    }
    double row = 0.0;
    Vector h = Vector::Zero(out);
    for (int j = 0; j < 3; ++j) {
      const double a = adj(i, j) ? e[j] / z : 0.0;
      EXPECT_NEAR(r.attention(i, j), a, 1e-14);
      row += r.attention(i, j);
      h += a * wh.col(j);
    }
    EXPECT_NEAR(row, 1.0, 1e-12);
    EXPECT_TRUE(r.features.col(i).isApprox(h.cwiseMax(0.0), 1e-12));
  }
}

TEST(GatForward, EmptyGraphAndIsolatedNode) {
  std::mt19937_64 rng(1);
  const auto p = GatLayerParams::random(4, 3, rng);
  const auto r = gat_forward(p, Matrix(4, 0), Adjacency(0, 0), false, 0.1, rng);
  EXPECT_EQ(r.features.cols(), 0);
  Adjacency adj = full(2);
  adj(1, 0) = adj(1, 1) = false;
  EXPECT_THROW(gat_forward(p, random_matrix(4, 2, rng), adj, false, 0.1, rng), ShapeError);
}

TEST(GatForward, DropoutOnlyInTraining) {
  std::mt19937_64 rng(2);
  const auto p = GatLayerParams::random(4, 64, rng);
  const Matrix m = random_matrix(4, 3, rng);
  std::mt19937_64 a(1), b(1);
  const auto eval1 = gat_forward(p, m, full(3), false, 0.5, a);
  const auto eval2 = gat_forward(p, m, full(3), false, 0.5, b);
  EXPECT_EQ(eval1.features, eval2.features);
  const auto train = gat_forward(p, m, full(3), true, 0.5, a);
  EXPECT_NE(train.features, eval1.features);
}

TEST(GatForward, AttentionRowsAreDistributions) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    const auto p = GatLayerParams::random(5, 6, rng);
    const Eigen::Index n = 1 + trial % 6;
    const auto r = gat_forward(p, random_matrix(5, n, rng, 3.0), full(n), false, 0.1, rng);
    for (Eigen::Index i = 0; i < n; ++i) {
      EXPECT_NEAR(r.attention.row(i).sum(), 1.0, 1e-9);
      EXPECT_GE(r.attention.row(i).minCoeff(), 0.0);
    }
  }
}

TEST(MvNll, ClosedFormValues) {
  const Eigen::Vector3d y(1.0, 2.0, 3.0);
  const double c = 1.5 * std::log(2.0 * std::numbers::pi);
  EXPECT_NEAR(mv_nll_loss(y, Eigen::Matrix3d::Identity(), y), c, 1e-12);
  EXPECT_NEAR(c, 2.7568, 5e-5);
  EXPECT_NEAR(mv_nll_loss(y + Eigen::Vector3d(1, 0, 0), Eigen::Matrix3d::Identity(), y), 3.2568, 5e-5);
  const Eigen::Matrix3d s = Eigen::Vector3d(4, 1, 1).asDiagonal();
  EXPECT_NEAR(mv_nll_loss(y + Eigen::Vector3d(2, 0, 0), s, y), 3.9499, 1e-4);
  EXPECT_NEAR(mv_nll_loss(y + Eigen::Vector3d(2, 0, 0), s, y), 0.5 + 0.5 * std::log(4.0) + c, 1e-12);
}

TEST(MvNll, RejectsIndefiniteCovariance) {
  const Eigen::Vector3d y = Eigen::Vector3d::Zero();
  EXPECT_THROW(mv_nll_loss(y, Eigen::Vector3d(1, -1, 1).asDiagonal(), y), NumericError);
  Eigen::Matrix3d asym = Eigen::Matrix3d::Identity();
  asym(0, 1) = 0.5;
  EXPECT_THROW(mv_nll_loss(y, asym, y), NumericError);
}

TEST(MvNll, MinimisedAtTarget) {
  const Eigen::Vector3d y(0.3, -0.2, 1.0);
  const Eigen::Matrix3d s = Eigen::Vector3d(0.5, 2.0, 1.0).asDiagonal();
  // Line scan along x: the slope is negative before the target and positive after.
  for (double d = -2.0; d <= 2.0; d += 0.25) {
    if (std::abs(d) < 1e-12) continue;
    const Eigen::Vector3d mu = y + Eigen::Vector3d(d, 0, 0);
    const double h = 1e-6;
    const double slope = (mv_nll_loss(mu + Eigen::Vector3d(h, 0, 0), s, y) - mv_nll_loss(mu - Eigen::Vector3d(h, 0, 0), s, y)) / (2 * h);
    EXPECT_EQ(slope > 0, d > 0) << d;
  }
}

TEST(Backward, QuadraticGradient) {
  std::mt19937_64 rng(8);
  ParamSet params;
  params.add("W", random_matrix(3, 4, rng));
  const Matrix x = random_matrix(4, 1, rng);
  Tape tape;
  Var w = tape.parameter(params, "W");
  Var wx = matmul(w, tape.constant(x));
  tape.backward(scale(sum(hadamard(wx, wx)), 0.5));
  const Matrix expected = (params.value("W") * x) * x.transpose();
  EXPECT_TRUE(params.grad("W").isApprox(expected, 1e-14));
}

TEST(Backward, ConstantLossGivesZeroGradients) {
  ParamSet params;
  params.add("W", Matrix::Ones(2, 2));
  Tape tape;
  tape.parameter(params, "W");
  tape.backward(tape.constant(Matrix::Constant(1, 1, 3.0)));
  EXPECT_TRUE(params.grad("W").isZero(0.0));
}

TEST(Backward, Misuse) {
  Tape tape;
  EXPECT_THROW(tape.backward(Var()), StateError);
  Tape eval(false);
  Var c = eval.constant(Matrix::Ones(1, 1));
  EXPECT_THROW(eval.backward(c), StateError);
  Tape t2;
  Var v = t2.constant(Matrix::Ones(2, 1));
  EXPECT_THROW(t2.backward(v), ShapeError);
  Var s = sum(v);
  t2.backward(s);
  EXPECT_THROW(t2.backward(s), StateError);
}

namespace {

double pipeline_loss(stgl::StglModel& model, const std::vector<Matrix>& window, const Adjacency& adj,
                     const Matrix& target, int steps, bool differentiate) {
  Tape tape(differentiate);
  stgl::StglNetwork net(tape, model);
  auto roll = net.rollout(window, adj, steps);
  Var loss = diag_gaussian_nll(roll.means.back(), roll.variances.back(), target);
  const double v = loss.value()(0, 0);
  if (differentiate) tape.backward(loss);
  return v;
}

}  // namespace

TEST(Backward, PipelineMatchesFiniteDifferences) {
  for (int instance = 0; instance < 3; ++instance) {
    std::mt19937_64 rng(100 + instance);
    stgl::StglModel model(stgl::ModelDims::small(4), 1000 + instance);
    const Eigen::Index m = 3;
    std::vector<Matrix> window;
    Matrix pos = random_matrix(3, m, rng);
    for (int t = 0; t < 5; ++t) {
      window.push_back(pos);
      pos += random_matrix(3, m, rng, 0.1);
    }
    const Matrix target = pos;
    const Adjacency adj = full(m);
    model.params().zero_grad();
    pipeline_loss(model, window, adj, target, 2, true);
    for (const auto& name : model.params().names()) {
      Matrix& value = model.params().value(name);
      const Matrix grad = model.params().grad(name);
      for (Eigen::Index i = 0; i < value.size(); i += 3) {
        const double saved = value(i);
        const double h = 1e-5;
        value(i) = saved + h;
        const double up = pipeline_loss(model, window, adj, target, 2, false);
        value(i) = saved - h;
        const double down = pipeline_loss(model, window, adj, target, 2, false);
        value(i) = saved;
        const double fd = (up - down) / (2 * h);
        const double scale = std::max({std::abs(fd), std::abs(grad(i)), 1e-3});
        EXPECT_LT(std::abs(fd - grad(i)) / scale, 1e-4) << name << "[" << i << "]";
      }
    }
  }
}

TEST(Adam, ZeroGradientLeavesParameters) {
  ParamSet params;
  params.add("w", Matrix::Constant(2, 2, 0.5));
  AdamState adam;
  adam_step(adam, params);
  EXPECT_TRUE(params.value("w").isApprox(Matrix::Constant(2, 2, 0.5), 0.0));
}

TEST(Adam, StepDescends) {
  ParamSet params;
  params.add("w", Matrix::Ones(1, 1));
  AdamState adam(AdamConfig{.learning_rate = 0.1});
  params.grad("w")(0, 0) = 2.0;  // d(w^2)/dw at w = 1
  adam.step(params);
  EXPECT_LT(params.value("w")(0, 0), 1.0);
  EXPECT_TRUE(params.grad("w").isZero(0.0));
}

TEST(Adam, ConvergesOnQuadratic) {
  ParamSet params;
  Matrix w(2, 1);
  w << 1.5, -2.0;
  params.add("w", w);
  AdamState adam(AdamConfig{.learning_rate = 0.05});
  for (int i = 0; i < 200; ++i) {
    const Matrix& v = params.value("w");
    params.grad("w") << 2.0 * v(0), 8.0 * v(1);
    adam.step(params);
  }
  EXPECT_LT(params.value("w").norm(), 1e-2);
}

TEST(Adam, RejectsNaNGradientByName) {
  ParamSet params;
  params.add("layer.w", Matrix::Ones(2, 2));
  params.grad("layer.w")(1, 0) = std::nan("");
  AdamState adam;
  try {
    adam.step(params);
    FAIL() << "expected a NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("layer.w"), std::string::npos);
  }
  EXPECT_TRUE(params.value("layer.w").isOnes(0.0));
}

TEST(Checkpoint, TextRoundTripIsBitExact) {
  stgl::StglModel model(stgl::ModelDims{}, 77);
  model.params().value("head.w")(0, 0) = 1e-310;  // subnormal
  model.params().value("head.w")(0, 1) = -0.1;
  std::stringstream ss;
  write_params(ss, model.params());
  const ParamSet back = read_params(ss);
  EXPECT_TRUE(back == model.params());
  for (const auto& name : back.names()) {
    const Matrix& a = back.value(name);
    const Matrix& b = model.params().value(name);
    EXPECT_EQ(0, std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size()))) << name;
  }
}

TEST(Checkpoint, RejectsGarbage) {
  std::stringstream ss("not a checkpoint\n");
  EXPECT_THROW(read_params(ss), Error);
}

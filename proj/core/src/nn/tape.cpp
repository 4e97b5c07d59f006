#include "colloc/nn/tape.hpp"

#include "colloc/error.hpp"

#include <fmt/format.h>

#include <cmath>
#include <limits>
#include <numbers>

namespace colloc::nn {

const Matrix& Var::value() const {
  if (!tape_) throw StateError("use of an unbound Var");
  return tape_->value(id_);
}

Tape::Node& Tape::node(int id) { return nodes_.at(static_cast<std::size_t>(id)); }
const Tape::Node& Tape::node(int id) const { return nodes_.at(static_cast<std::size_t>(id)); }

void Tape::check_owned(const Var& v) const {
  if (v.tape_ != this) throw StateError("Var belongs to a different tape");
}

const Matrix& Tape::value(int id) const { return node(id).val(); }

Var Tape::constant(Matrix value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::constant_ref(const Matrix& value) {
  Node n;
  n.external = &value;
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::parameter(ParamSet& params, std::string_view name) {
  auto key = std::make_pair(static_cast<const void*>(&params), std::string(name));
  if (auto it = param_nodes_.find(key); it != param_nodes_.end()) return Var(this, it->second);
  Node n;
  n.external = &params.value(name);
  if (record_) {
    n.param_grad = &params.grad(name);
    n.needs_grad = true;
  }
  nodes_.push_back(std::move(n));
  const int id = static_cast<int>(nodes_.size()) - 1;
  param_nodes_.emplace(std::move(key), id);
  return Var(this, id);
}

Var Tape::parameter(const ParamSet& params, std::string_view name) {
  auto key = std::make_pair(static_cast<const void*>(&params), std::string(name));
  if (auto it = param_nodes_.find(key); it != param_nodes_.end()) return Var(this, it->second);
  Var v = constant_ref(params.value(name));
  param_nodes_.emplace(std::move(key), v.id());
  return v;
}

Var Tape::record(Matrix value, bool needs_grad, BackwardFn backward) {
  Node n;
  n.value = std::move(value);
  n.needs_grad = record_ && needs_grad;
  if (n.needs_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

bool Tape::requires_grad(const Var& v) const {
  check_owned(v);
  return node(v.id_).needs_grad;
}

void Tape::accumulate(const Var& v, const Matrix& g) {
  Node& n = node(v.id_);
  if (!n.needs_grad) return;
  if (n.grad.size() == 0) {
    n.grad = g;
  } else {
    n.grad += g;
  }
}

Matrix Tape::grad(const Var& v) const {
  check_owned(v);
  const Node& n = node(v.id_);
  if (n.grad.size() == 0) return Matrix::Zero(n.val().rows(), n.val().cols());
  return n.grad;
}

void Tape::backward(const Var& loss) {
  if (!record_) throw StateError("backward on a non-recording tape");
  if (!loss.valid() || nodes_.empty()) throw StateError("backward before forward: no recorded computation");
  check_owned(loss);
  if (consumed_) throw StateError("backward already run on this tape");
  const Matrix& lv = loss.value();
  if (lv.rows() != 1 || lv.cols() != 1) {
    throw ShapeError(fmt::format("backward: loss must be 1x1, got {}x{}", lv.rows(), lv.cols()));
  }
  consumed_ = true;
  if (!node(loss.id_).needs_grad) return;
  accumulate(loss, Matrix::Ones(1, 1));
  for (int id = loss.id_; id >= 0; --id) {
    Node& n = node(id);
    if (!n.needs_grad || n.grad.size() == 0) continue;
    if (n.backward) {
      n.backward(*this, n.grad, n.val());
    }
    if (n.param_grad) *n.param_grad += n.grad;
  }
}

namespace {

Tape& same_tape(const Var& a, const Var& b) {
  if (!a.valid() || a.tape() != b.tape()) throw StateError("operands live on different tapes");
  return *a.tape();
}

bool needs(const Var& a) { return a.tape()->requires_grad(a); }

void require_same_shape(const Matrix& a, const Matrix& b, std::string_view op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(fmt::format("{}: shape mismatch {}x{} vs {}x{}", op, a.rows(), a.cols(), b.rows(), b.cols()));
  }
}

double sigmoid_scalar(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

Var matmul(const Var& a, const Var& b) {
  Tape& t = same_tape(a, b);
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  if (av.cols() != bv.rows()) {
    throw ShapeError(fmt::format("matmul: {}x{} * {}x{}", av.rows(), av.cols(), bv.rows(), bv.cols()));
  }
  return t.record(av * bv, needs(a) || needs(b), [a, b](Tape& tp, const Matrix& g, const Matrix&) {
    tp.accumulate(a, g * b.value().transpose());
    tp.accumulate(b, a.value().transpose() * g);
  });
}

Var matmul_bt(const Var& a, const Var& b) {
  Tape& t = same_tape(a, b);
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  if (av.cols() != bv.cols()) {
    throw ShapeError(fmt::format("matmul_bt: {}x{} * ({}x{})^T", av.rows(), av.cols(), bv.rows(), bv.cols()));
  }
  return t.record(av * bv.transpose(), needs(a) || needs(b), [a, b](Tape& tp, const Matrix& g, const Matrix&) {
    tp.accumulate(a, g * b.value());
    tp.accumulate(b, g.transpose() * a.value());
  });
}

Var add(const Var& a, const Var& b) {
  Tape& t = same_tape(a, b);
  require_same_shape(a.value(), b.value(), "add");
  return t.record(a.value() + b.value(), needs(a) || needs(b), [a, b](Tape& tp, const Matrix& g, const Matrix&) {
    tp.accumulate(a, g);
    tp.accumulate(b, g);
  });
}

Var add_bias(const Var& a, const Var& bias) {
  Tape& t = same_tape(a, bias);
  const Matrix& av = a.value();
  const Matrix& bv = bias.value();
  if (bv.cols() != 1 || bv.rows() != av.rows()) {
    throw ShapeError(fmt::format("add_bias: bias {}x{} for {}x{}", bv.rows(), bv.cols(), av.rows(), av.cols()));
  }
  Matrix out = av.colwise() + bv.col(0);
  return t.record(std::move(out), needs(a) || needs(bias), [a, bias](Tape& tp, const Matrix& g, const Matrix&) {
    tp.accumulate(a, g);
    tp.accumulate(bias, g.rowwise().sum());
  });
}

Var sub(const Var& a, const Var& b) {
  Tape& t = same_tape(a, b);
  require_same_shape(a.value(), b.value(), "sub");
  return t.record(a.value() - b.value(), needs(a) || needs(b), [a, b](Tape& tp, const Matrix& g, const Matrix&) {
    tp.accumulate(a, g);
    tp.accumulate(b, -g);
  });
}

Var hadamard(const Var& a, const Var& b) {
  Tape& t = same_tape(a, b);
  require_same_shape(a.value(), b.value(), "hadamard");
  return t.record(a.value().cwiseProduct(b.value()), needs(a) || needs(b), [a, b](Tape& tp, const Matrix& g, const Matrix&) {
    tp.accumulate(a, g.cwiseProduct(b.value()));
    tp.accumulate(b, g.cwiseProduct(a.value()));
  });
}

Var mask(const Var& a, const Matrix& m) {
  Tape& t = *a.tape();
  require_same_shape(a.value(), m, "mask");
  return t.record(a.value().cwiseProduct(m), needs(a), [a, m](Tape& tp, const Matrix& g, const Matrix&) {
    tp.accumulate(a, g.cwiseProduct(m));
  });
}

Var scale(const Var& a, double s) {
  Tape& t = *a.tape();
  return t.record(a.value() * s, needs(a), [a, s](Tape& tp, const Matrix& g, const Matrix&) { tp.accumulate(a, g * s); });
}

Var transpose(const Var& a) {
  Tape& t = *a.tape();
  return t.record(a.value().transpose(), needs(a),
                  [a](Tape& tp, const Matrix& g, const Matrix&) { tp.accumulate(a, g.transpose()); });
}

Var sigmoid(const Var& a) {
  Tape& t = *a.tape();
  Matrix out = a.value().unaryExpr([](double x) { return sigmoid_scalar(x); });
  return t.record(std::move(out), needs(a), [a](Tape& tp, const Matrix& g, const Matrix& y) {
    tp.accumulate(a, g.cwiseProduct(y.cwiseProduct((1.0 - y.array()).matrix())));
  });
}

Var tanh(const Var& a) {
  Tape& t = *a.tape();
  Matrix out = a.value().array().tanh().matrix();
  return t.record(std::move(out), needs(a), [a](Tape& tp, const Matrix& g, const Matrix& y) {
    tp.accumulate(a, (g.array() * (1.0 - y.array().square())).matrix());
  });
}

Var relu(const Var& a) {
  Tape& t = *a.tape();
  Matrix out = a.value().cwiseMax(0.0);
  return t.record(std::move(out), needs(a), [a](Tape& tp, const Matrix& g, const Matrix&) {
    tp.accumulate(a, (a.value().array() > 0.0).select(g, 0.0).matrix());
  });
}

Var leaky_relu(const Var& a, double slope) {
  Tape& t = *a.tape();
  const Matrix& av = a.value();
  Matrix out = (av.array() > 0.0).select(av, slope * av).matrix();
  return t.record(std::move(out), needs(a), [a, slope](Tape& tp, const Matrix& g, const Matrix&) {
    tp.accumulate(a, (a.value().array() > 0.0).select(g, slope * g).matrix());
  });
}

Var softplus(const Var& a, double floor) {
  Tape& t = *a.tape();
  Matrix out = a.value().unaryExpr([floor](double x) { return softplus(x) + floor; });
  return t.record(std::move(out), needs(a), [a](Tape& tp, const Matrix& g, const Matrix&) {
    tp.accumulate(a, g.cwiseProduct(a.value().unaryExpr([](double x) { return sigmoid_scalar(x); })));
  });
}

Var slice_rows(const Var& a, Eigen::Index begin, Eigen::Index count) {
  Tape& t = *a.tape();
  const Matrix& av = a.value();
  if (begin < 0 || count < 0 || begin + count > av.rows()) {
    throw ShapeError(fmt::format("slice_rows: [{}, {}) out of {} rows", begin, begin + count, av.rows()));
  }
  return t.record(av.middleRows(begin, count), needs(a), [a, begin, count](Tape& tp, const Matrix& g, const Matrix&) {
    Matrix full = Matrix::Zero(a.rows(), a.cols());
    full.middleRows(begin, count) = g;
    tp.accumulate(a, full);
  });
}

Var concat_rows(const Var& top, const Var& bottom) {
  Tape& t = same_tape(top, bottom);
  const Matrix& tv = top.value();
  const Matrix& bv = bottom.value();
  if (tv.cols() != bv.cols()) throw ShapeError(fmt::format("concat_rows: {} vs {} columns", tv.cols(), bv.cols()));
  Matrix out(tv.rows() + bv.rows(), tv.cols());
  out << tv, bv;
  const Eigen::Index split = tv.rows();
  return t.record(std::move(out), needs(top) || needs(bottom),
                  [top, bottom, split](Tape& tp, const Matrix& g, const Matrix&) {
                    tp.accumulate(top, g.topRows(split));
                    tp.accumulate(bottom, g.bottomRows(g.rows() - split));
                  });
}

Var sum(const Var& a) {
  Tape& t = *a.tape();
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return t.record(std::move(out), needs(a), [a](Tape& tp, const Matrix& g, const Matrix&) {
    tp.accumulate(a, Matrix::Constant(a.rows(), a.cols(), g(0, 0)));
  });
}

Var pairwise_sum(const Var& row_i, const Var& row_j) {
  Tape& t = same_tape(row_i, row_j);
  const Matrix& fi = row_i.value();
  const Matrix& fj = row_j.value();
  if (fi.rows() != 1 || fj.rows() != 1 || fi.cols() != fj.cols()) {
    throw ShapeError(fmt::format("pairwise_sum: expects two 1xM rows, got {}x{} and {}x{}", fi.rows(), fi.cols(),
                                 fj.rows(), fj.cols()));
  }
  const Eigen::Index m = fi.cols();
  Matrix out = fi.transpose().replicate(1, m) + fj.replicate(m, 1);
  return t.record(std::move(out), needs(row_i) || needs(row_j), [row_i, row_j](Tape& tp, const Matrix& g, const Matrix&) {
    tp.accumulate(row_i, g.rowwise().sum().transpose());
    tp.accumulate(row_j, g.colwise().sum());
  });
}

Var masked_softmax_rows(const Var& a, const Adjacency& allowed) {
  Tape& t = *a.tape();
  const Matrix& av = a.value();
  if (allowed.rows() != av.rows() || allowed.cols() != av.cols()) {
    throw ShapeError(fmt::format("masked_softmax_rows: mask {}x{} for {}x{}", allowed.rows(), allowed.cols(), av.rows(),
                                 av.cols()));
  }
  Matrix out = Matrix::Zero(av.rows(), av.cols());
  for (Eigen::Index i = 0; i < av.rows(); ++i) {
    double peak = -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < av.cols(); ++j) {
      if (allowed(i, j)) peak = std::max(peak, av(i, j));
    }
    if (!std::isfinite(peak)) throw ShapeError(fmt::format("masked_softmax_rows: row {} has no allowed entry", i));
    double total = 0.0;
    for (Eigen::Index j = 0; j < av.cols(); ++j) {
      if (allowed(i, j)) {
        out(i, j) = std::exp(av(i, j) - peak);
        total += out(i, j);
      }
    }
    out.row(i) /= total;
  }
  return t.record(std::move(out), needs(a), [a](Tape& tp, const Matrix& g, const Matrix& y) {
    // Zero entries of y stay zero, so masked entries receive no gradient.
    Matrix gy = g.cwiseProduct(y);
    Matrix da = gy - y.cwiseProduct(gy.rowwise().sum().replicate(1, y.cols()));
    tp.accumulate(a, da);
  });
}

Var diag_gaussian_nll(const Var& mean, const Var& variance, const Matrix& target) {
  Tape& t = same_tape(mean, variance);
  const Matrix& mu = mean.value();
  const Matrix& var = variance.value();
  require_same_shape(mu, var, "diag_gaussian_nll");
  require_same_shape(mu, target, "diag_gaussian_nll");
  if ((var.array() <= 0.0).any()) throw NumericError("diag_gaussian_nll: non-positive variance");
  const double log_2pi = std::log(2.0 * std::numbers::pi);
  const Eigen::ArrayXXd r = (mu - target).array();
  Matrix out(1, 1);
  out(0, 0) = 0.5 * (r.square() / var.array()).sum() + 0.5 * var.array().log().sum() +
              0.5 * static_cast<double>(mu.size()) * log_2pi;
  return t.record(std::move(out), needs(mean) || needs(variance),
                  [mean, variance, target](Tape& tp, const Matrix& g, const Matrix&) {
                    const Eigen::ArrayXXd v = variance.value().array();
                    const Eigen::ArrayXXd res = (mean.value() - target).array();
                    const double s = g(0, 0);
                    tp.accumulate(mean, (s * res / v).matrix());
                    tp.accumulate(variance, (s * 0.5 * (1.0 / v - res.square() / v.square())).matrix());
                  });
}

}  // namespace colloc::nn

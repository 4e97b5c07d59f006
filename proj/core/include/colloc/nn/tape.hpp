#pragma once

#include "colloc/nn/matrix.hpp"

#include <deque>
#include <functional>
#include <map>
#include <string_view>
#include <utility>

namespace colloc::nn {

class Tape;

/// Handle to a node recorded on a Tape. Cheap to copy; only valid while the
/// owning tape is alive.
class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  int id() const { return id_; }
  Tape* tape() const { return tape_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  int id_ = -1;
};

/// Reverse-mode differentiation tape over dense matrices.
///
/// Every op appends a node holding its forward value and, when the tape is
/// recording and some input requires a gradient, a closure that scatters the
/// node's gradient into its inputs. backward() walks the nodes in reverse
/// order and finally accumulates leaf gradients into their ParamSet slots.
///
/// A non-recording tape is a plain evaluator: parameters bind by reference and
/// no closures are stored.
class Tape {
 public:
  /// Receives the node's accumulated gradient and its forward value.
  using BackwardFn = std::function<void(Tape&, const Matrix& grad, const Matrix& value)>;

  explicit Tape(bool record = true) : record_(record) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return record_; }
  std::size_t size() const { return nodes_.size(); }

  Var constant(Matrix value);
  /// Binds an external matrix without copying; it must outlive the tape.
  Var constant_ref(const Matrix& value);
  /// Leaf bound to a named parameter. Repeated calls return the same node.
  Var parameter(ParamSet& params, std::string_view name);
  Var parameter(const ParamSet& params, std::string_view name);

  /// Seeds d(loss)/d(loss) = 1 and propagates. `loss` must be 1x1 and live on
  /// this recording tape. A tape can be differentiated once.
  void backward(const Var& loss);

  const Matrix& value(int id) const;
  bool requires_grad(const Var& v) const;
  /// Gradient of the last backward pass w.r.t. `v` (zeros if unreachable).
  Matrix grad(const Var& v) const;

  /// Appends an op result. `backward` is dropped when not needed.
  Var record(Matrix value, bool needs_grad, BackwardFn backward);
  /// Adds `g` to the gradient slot of `v` (no-op for constants).
  void accumulate(const Var& v, const Matrix& g);

 private:
  struct Node {
    Matrix value;
    const Matrix* external = nullptr;
    Matrix grad;
    BackwardFn backward;
    Matrix* param_grad = nullptr;
    bool needs_grad = false;

    const Matrix& val() const { return external ? *external : value; }
  };

  Node& node(int id);
  const Node& node(int id) const;
  void check_owned(const Var& v) const;

  bool record_;
  bool consumed_ = false;
  std::deque<Node> nodes_;
  std::map<std::pair<const void*, std::string>, int> param_nodes_;
};

// Elementwise and linear-algebra ops. All operands must live on the same tape.
Var matmul(const Var& a, const Var& b);
/// a * b^T
Var matmul_bt(const Var& a, const Var& b);
Var add(const Var& a, const Var& b);
/// Adds a column vector to every column of `a`.
Var add_bias(const Var& a, const Var& bias);
Var sub(const Var& a, const Var& b);
Var hadamard(const Var& a, const Var& b);
/// Elementwise product with a constant mask (dropout, column selection).
Var mask(const Var& a, const Matrix& m);
Var scale(const Var& a, double s);
Var transpose(const Var& a);
Var sigmoid(const Var& a);
Var tanh(const Var& a);
Var relu(const Var& a);
Var leaky_relu(const Var& a, double slope);
/// log(1 + e^x) + floor
Var softplus(const Var& a, double floor = 0.0);
Var slice_rows(const Var& a, Eigen::Index begin, Eigen::Index count);
Var concat_rows(const Var& top, const Var& bottom);
Var sum(const Var& a);
/// out(i, j) = row_i(0, i) + row_j(0, j); both operands are 1 x M.
Var pairwise_sum(const Var& row_i, const Var& row_j);
/// Row-wise softmax restricted to entries where `allowed` is set. Every row
/// must allow at least one entry.
Var masked_softmax_rows(const Var& a, const Adjacency& allowed);
/// Sum over columns of the diagonal-Gaussian negative log-likelihood of
/// `target` under N(mean, diag(variance)); all operands are D x B.
Var diag_gaussian_nll(const Var& mean, const Var& variance, const Matrix& target);

double softplus(double x);

}  // namespace colloc::nn

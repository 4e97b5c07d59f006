#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace colloc::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
/// Boolean node adjacency; entry (i, j) set when j is a neighbour of i.
using Adjacency = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

void require_shape(const Matrix& m, Eigen::Index rows, Eigen::Index cols, std::string_view what);
bool all_finite(const Matrix& m);

/// Named trainable parameters, each paired with a same-shaped gradient slot.
class ParamSet {
 public:
  /// Throws on a duplicate name or non-finite entries.
  void add(const std::string& name, Matrix value);

  bool contains(std::string_view name) const;
  Matrix& value(std::string_view name);
  const Matrix& value(std::string_view name) const;
  Matrix& grad(std::string_view name);
  const Matrix& grad(std::string_view name) const;

  void zero_grad();
  std::vector<std::string> names() const;
  std::size_t size() const { return slots_.size(); }
  std::size_t scalar_count() const;

  bool operator==(const ParamSet& other) const;

 private:
  struct Slot {
    Matrix value;
    Matrix grad;
  };
  Slot& slot(std::string_view name);
  const Slot& slot(std::string_view name) const;

  std::map<std::string, Slot, std::less<>> slots_;
};

/// Text checkpoint: header, then `param <name> <rows> <cols>` followed by the
/// row-major values at 17 significant digits. Round trips are bit-exact.
void write_params(std::ostream& out, const ParamSet& params);
ParamSet read_params(std::istream& in);

}  // namespace colloc::nn

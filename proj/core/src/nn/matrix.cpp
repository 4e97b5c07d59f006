#include "colloc/nn/matrix.hpp"

#include "colloc/error.hpp"

#include <fmt/format.h>

#include <cstdlib>
#include <istream>
#include <ostream>

namespace colloc::nn {

namespace {
constexpr std::string_view kParamsMagic = "colloc-params";
constexpr int kParamsVersion = 1;
}  // namespace

void require_shape(const Matrix& m, Eigen::Index rows, Eigen::Index cols, std::string_view what) {
  if (m.rows() != rows || m.cols() != cols) {
    throw ShapeError(fmt::format("{}: expected {}x{}, got {}x{}", what, rows, cols, m.rows(), m.cols()));
  }
}

bool all_finite(const Matrix& m) { return m.allFinite(); }

void ParamSet::add(const std::string& name, Matrix value) {
  if (slots_.contains(name)) throw Error(fmt::format("duplicate parameter '{}'", name));
  if (!value.allFinite()) throw NumericError(fmt::format("parameter '{}' has non-finite entries", name));
  Matrix grad = Matrix::Zero(value.rows(), value.cols());
  slots_.emplace(name, Slot{std::move(value), std::move(grad)});
}

bool ParamSet::contains(std::string_view name) const { return slots_.find(name) != slots_.end(); }

ParamSet::Slot& ParamSet::slot(std::string_view name) {
  auto it = slots_.find(name);
  if (it == slots_.end()) throw Error(fmt::format("unknown parameter '{}'", name));
  return it->second;
}

const ParamSet::Slot& ParamSet::slot(std::string_view name) const {
  auto it = slots_.find(name);
  if (it == slots_.end()) throw Error(fmt::format("unknown parameter '{}'", name));
  return it->second;
}

Matrix& ParamSet::value(std::string_view name) { return slot(name).value; }
const Matrix& ParamSet::value(std::string_view name) const { return slot(name).value; }
Matrix& ParamSet::grad(std::string_view name) { return slot(name).grad; }
const Matrix& ParamSet::grad(std::string_view name) const { return slot(name).grad; }

void ParamSet::zero_grad() {
  for (auto& [_, s] : slots_) s.grad.setZero();
}

std::vector<std::string> ParamSet::names() const {
  std::vector<std::string> out;
  out.reserve(slots_.size());
  for (const auto& [name, _] : slots_) out.push_back(name);
  return out;
}

std::size_t ParamSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [_, s] : slots_) n += static_cast<std::size_t>(s.value.size());
  return n;
}

bool ParamSet::operator==(const ParamSet& other) const {
  if (slots_.size() != other.slots_.size()) return false;
  auto a = slots_.begin();
  auto b = other.slots_.begin();
  for (; a != slots_.end(); ++a, ++b) {
    if (a->first != b->first) return false;
    if (a->second.value.rows() != b->second.value.rows() || a->second.value.cols() != b->second.value.cols()) {
      return false;
    }
    if (a->second.value != b->second.value) return false;
  }
  return true;
}

void write_params(std::ostream& out, const ParamSet& params) {
  out << kParamsMagic << ' ' << kParamsVersion << '\n';
  out << "count " << params.size() << '\n';
  for (const auto& name : params.names()) {
    const Matrix& m = params.value(name);
    out << "param " << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        if (c) out << ' ';
        out << fmt::format("{:.17g}", m(r, c));
      }
      out << '\n';
    }
  }
}

ParamSet read_params(std::istream& in) {
  std::string magic;
  int version = 0;
  if (!(in >> magic >> version) || magic != kParamsMagic) throw ConfigError("not a parameter checkpoint");
  if (version != kParamsVersion) throw ConfigError(fmt::format("unsupported checkpoint version {}", version));
  std::string key;
  std::size_t count = 0;
  if (!(in >> key >> count) || key != "count") throw ConfigError("checkpoint: missing parameter count");
  ParamSet params;
  for (std::size_t i = 0; i < count; ++i) {
    std::string name;
    Eigen::Index rows = 0, cols = 0;
    if (!(in >> key >> name >> rows >> cols) || key != "param" || rows < 0 || cols < 0) {
      throw ConfigError(fmt::format("checkpoint: malformed header for parameter #{}", i));
    }
    Matrix m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) {
        std::string token;
        if (!(in >> token)) throw ConfigError(fmt::format("checkpoint: truncated values for '{}'", name));
        char* end = nullptr;
        m(r, c) = std::strtod(token.c_str(), &end);
        if (end != token.c_str() + token.size()) {
          throw ConfigError(fmt::format("checkpoint: bad value '{}' in '{}'", token, name));
        }
      }
    }
    params.add(name, std::move(m));
  }
  return params;
}

}  // namespace colloc::nn

#include "colloc/stgl/graph.hpp"

#include "colloc/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace colloc::stgl {

bool is_symmetric(const Mat3& m, double tolerance) {
  return (m - m.transpose()).cwiseAbs().maxCoeff() <= tolerance * std::max(1.0, m.cwiseAbs().maxCoeff());
}

bool is_psd(const Mat3& m, double tolerance) {
  if (!m.allFinite() || !is_symmetric(m)) return false;
  Eigen::SelfAdjointEigenSolver<Mat3> eig(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly);
  return eig.eigenvalues().minCoeff() >= -tolerance * std::max(1.0, m.cwiseAbs().maxCoeff());
}

std::optional<std::size_t> ObservationGraph::index_of(ObjectId id) const {
  auto it = std::find(ids.begin(), ids.end(), id);
  if (it == ids.end()) return std::nullopt;
  return static_cast<std::size_t>(it - ids.begin());
}

void ObservationGraph::add(ObjectId id, const Vec3& position, const Mat3& covariance) {
  ids.push_back(id);
  positions.push_back(position);
  covariances.push_back(covariance);
}

void ObservationGraph::connect_all() {
  const auto n = static_cast<Eigen::Index>(ids.size());
  adjacency = nn::Adjacency::Constant(n, n, true);
}

void ObservationGraph::validate() const {
  const auto n = static_cast<Eigen::Index>(ids.size());
  if (positions.size() != ids.size() || covariances.size() != ids.size()) {
    throw ShapeError("observation graph: ids/positions/covariances length mismatch");
  }
  std::unordered_set<ObjectId> seen;
  for (ObjectId id : ids) {
    if (!seen.insert(id).second) throw Error(fmt::format("observation graph: duplicate object id {}", id));
  }
  if (adjacency.rows() != n || adjacency.cols() != n) {
    throw ShapeError(fmt::format("observation graph: adjacency {}x{} for {} nodes", adjacency.rows(),
                                 adjacency.cols(), n));
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!adjacency(i, i)) throw Error(fmt::format("observation graph: node {} lacks a self-loop", ids[i]));
    for (Eigen::Index j = 0; j < i; ++j) {
      if (adjacency(i, j) != adjacency(j, i)) throw Error("observation graph: adjacency is not symmetric");
    }
  }
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (!positions[i].allFinite()) throw NumericError(fmt::format("observation graph: object {} position", ids[i]));
    if (!is_psd(covariances[i])) {
      throw NumericError(fmt::format("observation graph: covariance of object {} is not symmetric PSD", ids[i]));
    }
  }
}

void SpatioTemporalGraph::push(ObservationGraph graph) {
  if (!graphs.empty()) {
    const double gap = graph.timestamp - graphs.back().timestamp;
    if (std::abs(gap - dt) > 1e-6) {
      throw Error(fmt::format("spatiotemporal graph: tick gap {} s, expected {} s", gap, dt));
    }
  }
  graphs.push_back(std::move(graph));
}

void SpatioTemporalGraph::trim(std::size_t max_len) {
  if (graphs.size() > max_len) {
    graphs.erase(graphs.begin(), graphs.begin() + static_cast<std::ptrdiff_t>(graphs.size() - max_len));
  }
}

void SpatioTemporalGraph::validate() const {
  if (dt <= 0.0) throw Error("spatiotemporal graph: dt must be positive");
  for (std::size_t i = 0; i < graphs.size(); ++i) {
    graphs[i].validate();
    if (i > 0 && std::abs(graphs[i].timestamp - graphs[i - 1].timestamp - dt) > 1e-6) {
      throw Error(fmt::format("spatiotemporal graph: non-uniform spacing at index {}", i));
    }
  }
}

std::size_t SpatioTemporalGraph::presence(ObjectId id) const {
  std::size_t n = 0;
  for (auto it = graphs.rbegin(); it != graphs.rend(); ++it) {
    if (!it->index_of(id)) break;
    ++n;
  }
  return n;
}

WindowBatch extract_window(const SpatioTemporalGraph& history, std::size_t length) {
  WindowBatch batch;
  if (length == 0 || history.size() < length) return batch;
  const std::size_t first = history.size() - length;
  const ObservationGraph& latest = history.latest();

  std::vector<std::size_t> latest_index;
  for (std::size_t k = 0; k < latest.size(); ++k) {
    const ObjectId id = latest.ids[k];
    bool everywhere = true;
    for (std::size_t g = first; g + 1 < history.size() && everywhere; ++g) {
      everywhere = history.graphs[g].index_of(id).has_value();
    }
    if (everywhere) {
      batch.ids.push_back(id);
      latest_index.push_back(k);
    }
  }
  const auto m = static_cast<Eigen::Index>(batch.ids.size());
  batch.positions.assign(length, nn::Matrix(3, m));
  for (std::size_t g = first; g < history.size(); ++g) {
    const ObservationGraph& graph = history.graphs[g];
    nn::Matrix& cols = batch.positions[g - first];
    for (Eigen::Index c = 0; c < m; ++c) {
      cols.col(c) = graph.positions[*graph.index_of(batch.ids[static_cast<std::size_t>(c)])];
    }
  }
  batch.adjacency.resize(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      const auto li = static_cast<Eigen::Index>(latest_index[static_cast<std::size_t>(i)]);
      const auto lj = static_cast<Eigen::Index>(latest_index[static_cast<std::size_t>(j)]);
      batch.adjacency(i, j) = i == j || latest.adjacency(li, lj);
    }
  }
  return batch;
}

WindowBatch extract_object_window(const SpatioTemporalGraph& history, ObjectId id) {
  const std::size_t run = history.presence(id);
  WindowBatch batch;
  batch.ids = {id};
  batch.positions.reserve(run);
  for (std::size_t g = history.size() - run; g < history.size(); ++g) {
    const ObservationGraph& graph = history.graphs[g];
    batch.positions.push_back(graph.positions[*graph.index_of(id)]);
  }
  batch.adjacency = nn::Adjacency::Constant(1, 1, true);
  return batch;
}

}  // namespace colloc::stgl

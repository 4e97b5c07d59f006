#pragma once

#include "colloc/nn/matrix.hpp"

#include <Eigen/Dense>

#include <optional>
#include <vector>

namespace colloc {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using ObjectId = int;
using RobotId = int;

}  // namespace colloc

namespace colloc::stgl {

/// One robot's snapshot of the scene: object positions with their measurement
/// covariances, and the spatial edges between them.
struct ObservationGraph {
  double timestamp = 0.0;
  std::vector<ObjectId> ids;
  std::vector<Vec3> positions;
  std::vector<Mat3> covariances;
  nn::Adjacency adjacency;

  std::size_t size() const { return ids.size(); }
  bool empty() const { return ids.empty(); }
  std::optional<std::size_t> index_of(ObjectId id) const;

  /// Appends a node; call connect_all() afterwards to rebuild the edge set.
  void add(ObjectId id, const Vec3& position, const Mat3& covariance);
  /// Fully connected edges with self-loops.
  void connect_all();
  /// Throws on duplicate ids, asymmetric adjacency, missing self-loops or an
  /// asymmetric / indefinite covariance.
  void validate() const;
};

/// Observation graphs at uniform tick spacing, oldest first.
struct SpatioTemporalGraph {
  double dt = 0.1;
  std::vector<ObservationGraph> graphs;

  std::size_t size() const { return graphs.size(); }
  bool empty() const { return graphs.empty(); }
  const ObservationGraph& latest() const { return graphs.back(); }

  /// Appends a graph; throws if its timestamp is not exactly one tick after
  /// the previous one (within 1e-6 s).
  void push(ObservationGraph graph);
  /// Drops the oldest graphs so at most `max_len` remain.
  void trim(std::size_t max_len);
  void validate() const;

  /// Number of trailing consecutive graphs that contain `id`.
  std::size_t presence(ObjectId id) const;
};

struct GaussianEstimate {
  Vec3 mean = Vec3::Zero();
  Mat3 covariance = Mat3::Identity();
};

/// Objects present in every one of the last `length` graphs of a history,
/// arranged column-wise for batched evaluation.
struct WindowBatch {
  std::vector<ObjectId> ids;
  std::vector<nn::Matrix> positions;  // `length` entries, each 3 x M, oldest first
  nn::Adjacency adjacency;            // M x M, restricted from the latest graph

  std::size_t objects() const { return ids.size(); }
  std::size_t length() const { return positions.size(); }
  nn::Matrix last_position() const { return positions.back(); }
};

/// Builds the window from the trailing `length` graphs. Objects missing from
/// any of them are left out. Returns an empty batch when the history is
/// shorter than `length`.
WindowBatch extract_window(const SpatioTemporalGraph& history, std::size_t length);
/// Window of a single object over the longest trailing run it is present in.
WindowBatch extract_object_window(const SpatioTemporalGraph& history, ObjectId id);

bool is_psd(const Mat3& m, double tolerance = 1e-12);
bool is_symmetric(const Mat3& m, double tolerance = 1e-9);

}  // namespace colloc::stgl

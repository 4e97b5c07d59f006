#pragma once

#include "colloc/stgl/graph.hpp"

#include <vector>

namespace colloc::fusion {

/// Belief over one object's location held by one robot.
struct StateBelief {
  Vec3 x = Vec3::Zero();
  Mat3 P = Mat3::Identity();
  double timestamp = 0.0;
  ObjectId object_id = 0;
  RobotId robot_id = 0;
};

/// Initial belief: zero location, 10 m^2 on every axis.
inline constexpr double kInitialVariance = 10.0;
StateBelief initial_belief(ObjectId object, RobotId robot, double timestamp, double variance = kInitialVariance);

struct Measurement {
  Vec3 z = Vec3::Zero();
  Mat3 R = Mat3::Identity();
  double timestamp = 0.0;
};

/// Rigid transform x' = R x + t from the source robot's frame into the target's.
class FrameTransform {
 public:
  FrameTransform() = default;
  /// Throws NumericError unless R^T R = I within 1e-9 and det R = +1.
  FrameTransform(const Mat3& rotation, const Vec3& translation, RobotId source = 0, RobotId target = 0);

  static FrameTransform identity(RobotId source = 0, RobotId target = 0);
  /// Rotation about +z by `yaw` radians followed by `translation`.
  static FrameTransform from_yaw(double yaw, const Vec3& translation, RobotId source = 0, RobotId target = 0);

  const Mat3& rotation() const { return rotation_; }
  const Vec3& translation() const { return translation_; }
  RobotId source() const { return source_; }
  RobotId target() const { return target_; }

  Vec3 apply(const Vec3& x) const { return rotation_ * x + translation_; }
  FrameTransform inverse() const;
  /// (*this) after `first`: maps first.source -> this->target.
  FrameTransform compose(const FrameTransform& first) const;

 private:
  Mat3 rotation_ = Mat3::Identity();
  Vec3 translation_ = Vec3::Zero();
  RobotId source_ = 0;
  RobotId target_ = 0;
};

/// Estimate sent `delay` seconds ago; belief.timestamp = now - delay.
struct DelayedEstimate {
  StateBelief belief;
  double delay = 0.0;
};

/// Per-robot weighting matrices; they sum to the identity.
struct FusionGain {
  std::vector<Mat3> gains;

  Mat3 sum() const;
};

/// Compensated estimate (x~, P~) of one robot expressed in its own frame.
struct CompensatedEstimate {
  Vec3 x = Vec3::Zero();
  Mat3 P = Mat3::Identity();
};

/// A collaborator's compensated estimate and the transform into the fusing
/// robot's frame.
struct RemoteEstimate {
  CompensatedEstimate estimate;
  FrameTransform to_local;
};

/// Symmetrise and check for non-finite entries.
Mat3 symmetrize(const Mat3& m);

}  // namespace colloc::fusion

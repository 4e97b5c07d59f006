#include "colloc/error.hpp"
#include "colloc/fusion/types.hpp"

#include <fmt/format.h>

#include <cmath>

namespace colloc::fusion {

StateBelief initial_belief(ObjectId object, RobotId robot, double timestamp, double variance) {
  return {Vec3::Zero(), variance * Mat3::Identity(), timestamp, object, robot};
}

FrameTransform::FrameTransform(const Mat3& rotation, const Vec3& translation, RobotId source, RobotId target)
    : rotation_(rotation), translation_(translation), source_(source), target_(target) {
  if (!rotation.allFinite() || !translation.allFinite()) throw NumericError("frame transform: non-finite entries");
  const double ortho = (rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff();
  if (ortho > 1e-9) throw NumericError(fmt::format("frame transform: rotation not orthonormal (error {:.3g})", ortho));
  if (std::abs(rotation.determinant() - 1.0) > 1e-9) throw NumericError("frame transform: rotation has det != +1");
}

FrameTransform FrameTransform::identity(RobotId source, RobotId target) {
  return FrameTransform(Mat3::Identity(), Vec3::Zero(), source, target);
}

FrameTransform FrameTransform::from_yaw(double yaw, const Vec3& translation, RobotId source, RobotId target) {
  Mat3 r = Eigen::AngleAxisd(yaw, Vec3::UnitZ()).toRotationMatrix();
  return FrameTransform(r, translation, source, target);
}

FrameTransform FrameTransform::inverse() const {
  FrameTransform out;
  out.rotation_ = rotation_.transpose();
  out.translation_ = -(out.rotation_ * translation_);
  out.source_ = target_;
  out.target_ = source_;
  return out;
}

FrameTransform FrameTransform::compose(const FrameTransform& first) const {
  FrameTransform out;
  out.rotation_ = rotation_ * first.rotation_;
  out.translation_ = rotation_ * first.translation_ + translation_;
  out.source_ = first.source_;
  out.target_ = target_;
  return out;
}

Mat3 FusionGain::sum() const {
  Mat3 s = Mat3::Zero();
  for (const auto& g : gains) s += g;
  return s;
}

Mat3 symmetrize(const Mat3& m) {
  if (!m.allFinite()) throw NumericError("non-finite covariance");
  return 0.5 * (m + m.transpose());
}

}  // namespace colloc::fusion

#pragma once

#include "colloc/fusion/types.hpp"

#include <array>
#include <string>
#include <string_view>

namespace colloc::fusion {

/// Estimate broadcast between robots. Field order on the wire is fixed:
/// robot id, object id, send timestamp, x (3), P upper triangle (6:
/// p00 p01 p02 p11 p12 p22), frame id.
struct EstimateMessage {
  RobotId robot_id = 0;
  ObjectId object_id = 0;
  double send_time = 0.0;
  Vec3 x = Vec3::Zero();
  std::array<double, 6> p_upper{};
  int frame_id = 0;

  Mat3 covariance() const;
  static std::array<double, 6> pack(const Mat3& P);
  bool operator==(const EstimateMessage&) const = default;
};

/// Comma-separated record, reals printed with 17 significant digits.
std::string format_message(const EstimateMessage& m);
EstimateMessage parse_message(std::string_view line);

}  // namespace colloc::fusion

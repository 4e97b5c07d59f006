#pragma once

#include "colloc/fusion/types.hpp"
#include "colloc/stgl/ensemble.hpp"
#include "colloc/stgl/model.hpp"

#include <span>
#include <utility>
#include <vector>

namespace colloc::fusion {

/// Jitter added to R before inverting the innovation covariance.
inline constexpr double kMeasurementJitter = 1e-9;

/// Single-robot update of the learned estimate with a measurement (H = I):
///   P = P_prev + Q;  K = P (P + R)^-1;  x^ = x + K (z - x);  P^ = (I - K) P.
/// The returned belief carries the measurement timestamp.
StateBelief predict_and_update(const StateBelief& prior, const Mat3& process_noise, const Vec3& learned_x,
                               const Measurement& z);

/// x' = R x + t,  P' = R P R^T.
std::pair<Vec3, Mat3> transform_frame(const FrameTransform& t, const Vec3& x, const Mat3& P);

/// P~ = P_delayed + Q~.
Mat3 compensated_uncertainty(const Mat3& P_delayed, const Mat3& Q_tilde);

/// E^n = (sum_j P~_j^-1)^-1 P~_n^-1. Covariances that are not positive definite
/// get 1e-9 I of jitter; still-singular ones are rejected naming the robot index.
FusionGain fusion_gain(std::span<const Mat3> covariances);

/// Fuses the robot's own compensated estimate with collaborators'. Remote
/// estimates are mapped into the local frame (means by the rigid transform,
/// covariances by rotation congruence) before the gains are computed.
///   x' = sum_n E^n x~^n,  P' = (sum_n P~_n^-1)^-1.
/// With no collaborators the own estimate is returned unchanged.
CompensatedEstimate fuse_states(const CompensatedEstimate& own, std::span<const RemoteEstimate> remote);

/// Result of rolling a delayed belief history forward.
struct Compensation {
  Vec3 x = Vec3::Zero();
  Mat3 Q = Mat3::Zero();
};

/// Number of whole ticks in `delta_t`; rejects negative delays and delays that
/// are not an integer multiple of dt (within 1e-6 ticks).
int delay_ticks(double delta_t, double dt);

/// Rolls the compensation ensemble forward delta_t/dt ticks from a robot's
/// belief history (graphs of posterior means, oldest first, the newest taken
/// delta_t ago). Returns the compensated mean and the ensemble process
/// uncertainty accumulated over the rollout for every object present across
/// the trailing `history_length` graphs. A zero delay returns the last belief
/// and Q~ = 0.
std::vector<std::pair<ObjectId, Compensation>> compensate_delay_all(std::span<const stgl::StglModel> models,
                                                                    const stgl::SpatioTemporalGraph& beliefs,
                                                                    double delta_t, double dt,
                                                                    std::size_t history_length);

/// Single-object form over that object's own belief sequence.
Compensation compensate_delay(std::span<const stgl::StglModel> models, std::span<const StateBelief> history,
                              double delta_t, double dt, std::size_t history_length = 8);

}  // namespace colloc::fusion

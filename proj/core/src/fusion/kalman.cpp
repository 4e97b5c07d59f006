#include "colloc/error.hpp"
#include "colloc/fusion/estimation.hpp"

namespace colloc::fusion {

StateBelief predict_and_update(const StateBelief& prior, const Mat3& process_noise, const Vec3& learned_x,
                               const Measurement& z) {
  if (!stgl::is_psd(process_noise)) throw NumericError("predict_and_update: Q is not symmetric PSD");
  if (!stgl::is_psd(z.R)) throw NumericError("predict_and_update: R is not symmetric PSD");
  if (!learned_x.allFinite() || !z.z.allFinite()) throw NumericError("predict_and_update: non-finite state");

  const Mat3 P = symmetrize(prior.P + process_noise);
  const Mat3 innovation_cov = P + z.R + kMeasurementJitter * Mat3::Identity();
  Eigen::LLT<Mat3> llt(innovation_cov);
  if (llt.info() != Eigen::Success) throw NumericError("predict_and_update: P + R is singular");
  // K = P S^-1 and both P and S are symmetric, so K = (S^-1 P)^T.
  const Mat3 gain = llt.solve(P).transpose();

  StateBelief post = prior;
  post.x = learned_x + gain * (z.z - learned_x);
  post.P = symmetrize((Mat3::Identity() - gain) * P);
  post.timestamp = z.timestamp;
  return post;
}

}  // namespace colloc::fusion

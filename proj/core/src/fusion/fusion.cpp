#include "colloc/error.hpp"
#include "colloc/fusion/estimation.hpp"

#include <fmt/format.h>

namespace colloc::fusion {

std::pair<Vec3, Mat3> transform_frame(const FrameTransform& t, const Vec3& x, const Mat3& P) {
  const Mat3& r = t.rotation();
  return {t.apply(x), symmetrize(r * P * r.transpose())};
}

Mat3 compensated_uncertainty(const Mat3& P_delayed, const Mat3& Q_tilde) { return P_delayed + Q_tilde; }

namespace {

Mat3 information(const Mat3& covariance, std::size_t robot) {
  Mat3 p = symmetrize(covariance);
  Eigen::LLT<Mat3> llt(p);
  if (llt.info() != Eigen::Success) {
    p += kMeasurementJitter * Mat3::Identity();
    llt.compute(p);
    if (llt.info() != Eigen::Success) {
      throw NumericError(fmt::format("fusion_gain: covariance of robot #{} is singular or indefinite", robot));
    }
  }
  return symmetrize(llt.solve(Mat3::Identity()));
}

}  // namespace

FusionGain fusion_gain(std::span<const Mat3> covariances) {
  if (covariances.empty()) throw Error("fusion_gain: no covariances");
  std::vector<Mat3> info;
  info.reserve(covariances.size());
  Mat3 total = Mat3::Zero();
  for (std::size_t n = 0; n < covariances.size(); ++n) {
    info.push_back(information(covariances[n], n));
    total += info.back();
  }
  Eigen::LLT<Mat3> llt(total);
  if (llt.info() != Eigen::Success) throw NumericError("fusion_gain: information sum is singular");
  FusionGain out;
  out.gains.reserve(info.size());
  for (const auto& i : info) out.gains.push_back(llt.solve(i));
  return out;
}

CompensatedEstimate fuse_states(const CompensatedEstimate& own, std::span<const RemoteEstimate> remote) {
  if (remote.empty()) return own;
  std::vector<Vec3> means{own.x};
  std::vector<Mat3> covs{own.P};
  for (const auto& r : remote) {
    auto [x, P] = transform_frame(r.to_local, r.estimate.x, r.estimate.P);
    means.push_back(x);
    covs.push_back(P);
  }
  FusionGain gain = fusion_gain(covs);
  CompensatedEstimate out;
  out.x = Vec3::Zero();
  Mat3 info_total = Mat3::Zero();
  for (std::size_t n = 0; n < means.size(); ++n) {
    out.x += gain.gains[n] * means[n];
    info_total += information(covs[n], n);
  }
  out.P = symmetrize(info_total.llt().solve(Mat3::Identity()));
  return out;
}

}  // namespace colloc::fusion

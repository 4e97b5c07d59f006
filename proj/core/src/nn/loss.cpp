#include "colloc/nn/loss.hpp"

#include "colloc/error.hpp"

#include <cmath>
#include <numbers>

namespace colloc::nn {

double mv_nll_loss(const Eigen::Vector3d& mu, const Eigen::Matrix3d& sigma, const Eigen::Vector3d& y) {
  if (!sigma.allFinite() || !mu.allFinite() || !y.allFinite()) throw NumericError("mv_nll_loss: non-finite input");
  if ((sigma - sigma.transpose()).cwiseAbs().maxCoeff() > 1e-9 * std::max(1.0, sigma.cwiseAbs().maxCoeff())) {
    throw NumericError("mv_nll_loss: covariance is not symmetric");
  }
  Eigen::LLT<Eigen::Matrix3d> llt(sigma);
  if (llt.info() != Eigen::Success) throw NumericError("mv_nll_loss: covariance is not positive definite");
  const Eigen::Vector3d r = mu - y;
  const double mahalanobis = r.dot(llt.solve(r));
  const Eigen::Vector3d diag = llt.matrixL().toDenseMatrix().diagonal();
  const double log_det = 2.0 * diag.array().log().sum();
  return 0.5 * mahalanobis + 0.5 * log_det + 1.5 * std::log(2.0 * std::numbers::pi);
}

}  // namespace colloc::nn

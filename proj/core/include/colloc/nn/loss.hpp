#pragma once

#include <Eigen/Dense>

namespace colloc::nn {

/// Multivariate Gaussian negative log-likelihood of `y` under N(mu, sigma):
/// 0.5 r^T sigma^-1 r + 0.5 log|sigma| + 1.5 log(2 pi), r = mu - y.
/// Throws NumericError when sigma is not symmetric positive definite.
double mv_nll_loss(const Eigen::Vector3d& mu, const Eigen::Matrix3d& sigma, const Eigen::Vector3d& y);

}  // namespace colloc::nn

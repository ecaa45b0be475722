#include "lookaround/depth.hpp"

#include <cmath>

#include "lookaround/errors.hpp"

namespace lookaround::depth {

DepthPrediction::DepthPrediction(DepthMap mean_, DepthMap sigma_)
    : mean(std::move(mean_)), sigma(std::move(sigma_)) {
  if (mean.width != sigma.width || mean.height != sigma.height)
    throw ContractViolation("DepthPrediction: mean/sigma dimension mismatch");
  for (std::size_t i = 0; i < mean.values.size(); ++i)
    if (std::isfinite(mean.values[i]) && !(sigma.values[i] >= kSigmaFloor))
      throw ContractViolation("DepthPrediction: sigma below floor on a valid pixel");
}

DepthMap DepthPrediction::to_depthmap() const {
  DepthMap out = mean;
  out.sigma = sigma.values;
  return out;
}

DepthNll depth_nll(const DepthPrediction& pred, const DepthMap& gt, double lambda_hat) {
  if (pred.mean.width != gt.width || pred.mean.height != gt.height)
    throw ContractViolation("depth_nll: dimension mismatch");
  if (!(lambda_hat > 0.0)) throw ContractViolation("depth_nll: lambda_hat must be positive");

  const double sqrt2 = std::sqrt(2.0);
  const double inv_lambda = 1.0 / lambda_hat;
  DepthNll out;
  for (std::size_t i = 0; i < gt.values.size(); ++i) {
    const double d = gt.values[i];
    if (!std::isfinite(d)) continue;
    const double s = pred.sigma.values[i];
    const double r = std::abs(d - inv_lambda * pred.mean.values[i]);
    out.sum += -std::log(sqrt2 / (2.0 * s)) + sqrt2 * r / s;
    ++out.count;
  }
  return out;
}

PointCloud align_partial_cloud(const DepthPrediction& pred, const Calibration& k,
                               const RigidPose& g_hat) {
  PointCloud cloud = backproject(pred.to_depthmap(), k);
  const RigidPose inv = g_hat.inverse();
  for (Vec3& p : cloud.points) p = inv.apply(p);
  return cloud;
}

}  // namespace lookaround::depth

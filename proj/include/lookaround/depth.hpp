#pragma once

#include "lookaround/depthmap.hpp"
#include "lookaround/geometry.hpp"

namespace lookaround::depth {

constexpr double kSigmaFloor = 1e-3;

/// Per-pixel depth mean and Laplace scale, same dimensions.
struct DepthPrediction {
  DepthMap mean;   // canonical units
  DepthMap sigma;  // Laplace scales, >= kSigmaFloor on valid pixels

  DepthPrediction() = default;
  DepthPrediction(DepthMap mean, DepthMap sigma);

  /// Single map carrying mean values with the sigma plane attached.
  DepthMap to_depthmap() const;
};

struct DepthNll {
  double sum = 0.0;  // over valid ground-truth pixels
  int count = 0;     // valid pixels, for per-pixel averaging
};

/// Laplace negative log-likelihood of the observed map given the predicted
/// mean/scale, with the prediction brought into observed units by
/// 1/lambda_hat: sum_j -ln(sqrt(2)/(2 s_j)) + sqrt(2) |d_j - dhat_j/lambda|/s_j.
/// Invalid observed pixels contribute nothing.
DepthNll depth_nll(const DepthPrediction& pred, const DepthMap& gt, double lambda_hat);

/// Predicted depth back-projected to the camera frame and moved into the
/// global frame by the inverse predicted pose; per-point confidence 1/sigma.
PointCloud align_partial_cloud(const DepthPrediction& pred, const Calibration& k,
                               const RigidPose& g_hat);

}  // namespace lookaround::depth

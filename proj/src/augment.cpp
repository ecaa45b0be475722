#include "lookaround/augment.hpp"

#include <cmath>

#include "lookaround/errors.hpp"
#include "lookaround/rng.hpp"
#include "lookaround/threads.hpp"

namespace lookaround::augment {

RigidPose sample_perturbation(const PerturbationConfig& cfg, std::mt19937_64& rng) {
  RigidPose delta;
  if (cfg.max_rotation_rad > 0.0) {
    std::normal_distribution<double> g(0.0, 1.0);
    Vec3 axis(g(rng), g(rng), g(rng));
    const double n = axis.norm();
    if (n > 1e-12) {
      const double angle = cfg.max_rotation_rad * std::cbrt(uniform_real(rng, 0.0, 1.0));
      delta.rotation = so3_exp((angle / n) * axis);
    }
  }
  double lx = 0.0, ly = 0.0;
  if (cfg.lateral_bound > 0.0) {
    lx = uniform_real(rng, -cfg.lateral_bound, cfg.lateral_bound);
    ly = uniform_real(rng, -cfg.lateral_bound, cfg.lateral_bound);
  }
  double fwd = 0.0;
  if (cfg.forward_bias_mean > 0.0)
    fwd = uniform_real(rng, 0.5 * cfg.forward_bias_mean, 1.5 * cfg.forward_bias_mean);
  // moving the camera toward the scene shrinks camera-frame z
  delta.translation = Vec3(lx, ly, -fwd);
  return delta;
}

namespace {

WarpResult warp_impl(const synth::Frame& frame, const DepthMap& src, const RigidPose& delta,
                     bool parallel) {
  const Calibration& k = frame.calibration;
  if (src.width != k.width || src.height != k.height)
    throw ContractViolation("dibr_warp: depth dimensions do not match calibration");

  const int n = k.width * k.height;
  // pass 1: transform every valid source pixel (pure, parallel)
  std::vector<int> target(n, -1);
  std::vector<double> new_z(n, 0.0);

  auto transform_pixel = [&](int i) {
    const double d = src.values[i];
    if (!std::isfinite(d)) return;
    const int u = i % k.width;
    const int v = i / k.width;
    const Vec3 p((u - k.cx) / k.fx * d, (v - k.cy) / k.fy * d, d);
    const Vec3 q = delta.apply(p);
    if (q.z() <= 1e-9) return;
    const Eigen::Vector2d uv = project(q, k);
    const int tu = static_cast<int>(std::lround(uv.x()));
    const int tv = static_cast<int>(std::lround(uv.y()));
    if (tu < 0 || tv < 0 || tu >= k.width || tv >= k.height) return;
    target[i] = tv * k.width + tu;
    new_z[i] = q.z();
  };

  if (parallel) {
#pragma omp parallel for schedule(static) num_threads(threads::worker_count())
    for (int i = 0; i < n; ++i) transform_pixel(i);
  } else {
    for (int i = 0; i < n; ++i) transform_pixel(i);
  }

  // pass 2: z-buffer resolve in source order (serial, deterministic)
  WarpResult out;
  out.frame.index = frame.index;
  out.frame.calibration = k;
  out.frame.depth = DepthMap(k.width, k.height);
  for (int i = 0; i < n; ++i) {
    if (target[i] < 0) continue;
    double& slot = out.frame.depth.values[target[i]];
    if (!std::isfinite(slot) || new_z[i] < slot) slot = new_z[i];
  }

  out.pose = delta.compose(frame.observed_pose);
  out.frame.observed_pose = out.pose;
  out.frame.gt_global_pose = delta.compose(frame.gt_global_pose);
  out.frame.descriptor = synth::depth_descriptor(out.frame.depth);
  return out;
}

}  // namespace

WarpResult dibr_warp(const synth::Frame& frame, const DepthMap& depth_source,
                     const RigidPose& delta) {
  return warp_impl(frame, depth_source, delta, true);
}

WarpResult dibr_warp_serial(const synth::Frame& frame, const DepthMap& depth_source,
                            const RigidPose& delta) {
  return warp_impl(frame, depth_source, delta, false);
}

}  // namespace lookaround::augment

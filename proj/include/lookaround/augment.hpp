#pragma once

#include <cstdint>
#include <random>

#include "lookaround/depthmap.hpp"
#include "lookaround/geometry.hpp"
#include "lookaround/synth.hpp"

namespace lookaround::augment {

/// Viewpoint perturbation bounds. The forward bias moves the camera toward
/// the object so the warp mostly covers pixels instead of unoccluding them.
struct PerturbationConfig {
  double max_rotation_rad = 10.0 * M_PI / 180.0;
  double lateral_bound = 0.2;      // world units
  double forward_bias_mean = 0.2;  // world units, > 0 moves toward the object
};

/// Camera-frame perturbation: rotation uniform in the angle ball, lateral
/// translation uniform in [-b, b]^2, forward component uniform in
/// [mu/2, 3mu/2] (mean mu). Identity when all bounds are zero.
RigidPose sample_perturbation(const PerturbationConfig& cfg, std::mt19937_64& rng);

struct WarpResult {
  synth::Frame frame;  // warped depth (holes invalid), recomputed descriptor
  RigidPose pose;      // g* = delta o g
};

/// Depth-image-based re-rendering: every valid source pixel is
/// back-projected, moved by delta (a camera-frame motion), and re-projected
/// with a 1-pixel nearest splat; a z-buffer keeps the closest surface and
/// untouched target pixels stay invalid. The OpenMP variant runs the
/// per-pixel transform in parallel and resolves the z-buffer serially, so it
/// matches the serial reference bit for bit.
WarpResult dibr_warp(const synth::Frame& frame, const DepthMap& depth_source,
                     const RigidPose& delta);
WarpResult dibr_warp_serial(const synth::Frame& frame, const DepthMap& depth_source,
                            const RigidPose& delta);

}  // namespace lookaround::augment
